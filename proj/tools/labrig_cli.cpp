#include <cstdio>

int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::puts("labrig: subcommands not wired yet");
  return 1;
}
