// A parallel region with a worksharing loop and a critical section.

#include <cstdio>
#include <vector>

#include "fj/fj.hpp"

int main() {
  std::vector<double> v(1000);
  double sum = 0.0;

  fj::fork(4, [&](int tid) {
    fj::LoopAssignment mine = fj::static_init(fj::get_num_threads(), tid, fj::SchedKind::static_block(), 0,
                                              static_cast<std::int64_t>(v.size()) - 1, 1);
    double partial = 0.0;
    mine.for_each_iteration([&](std::int64_t i) {
      v[i] = 0.5 * static_cast<double>(i);
      partial += v[i];
    });

    fj::critical_enter();
    sum += partial;
    fj::critical_exit();

    fj::barrier_wait();
    if (fj::single_enter()) std::printf("team of %d, sum = %.1f\n", fj::get_num_threads(), sum);
  });

  fj::runtime_shutdown();
}
