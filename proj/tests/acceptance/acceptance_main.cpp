// Acceptance suite: one pass/fail line per criterion, nonzero exit when
// any fails. Filled in alongside the modules it exercises.

#include <cstdio>

int main() {
  std::printf("acceptance suite placeholder\n");
  return 1;
}
