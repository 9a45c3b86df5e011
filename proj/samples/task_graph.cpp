// Explicit tasks ordered through dependences on two variables.

#include <cstdio>

#include "fj/fj.hpp"

int main() {
  int x = 0;
  int y = 0;

  fj::fork(2, [&](int) {
    if (!fj::single_enter()) return;
    fj::task_spawn([&] { x = 1; }, {fj::Depend::out(&x)});
    fj::task_spawn([&] { y = 2; }, {fj::Depend::out(&y)});
    fj::task_spawn([&] { std::printf("x + y = %d\n", x + y); }, {fj::Depend::in(&x), fj::Depend::in(&y)});
    fj::taskwait();
  });

  fj::runtime_shutdown();
}
