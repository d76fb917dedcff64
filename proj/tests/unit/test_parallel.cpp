#include <gtest/gtest.h>

#include <cstdlib>
#include <random>

#include "demonpatch/demon.hpp"
#include "demonpatch/parallel.hpp"
#include "oracles.hpp"

using namespace demonpatch;

namespace {

struct ThreadGuard {
  int saved = parallel::threads();
  ~ThreadGuard() { parallel::set_threads(saved); }
};

}  // namespace

TEST(Parallel, EveryIndexOnce) {
  ThreadGuard g;
  for (int t : {1, 2, 3, 8}) {
    parallel::set_threads(t);
    std::vector<int> hits(1001, 0);
    parallel::for_each_index(0, hits.size(), [&](std::size_t i) { ++hits[i]; });
    for (int h : hits) ASSERT_EQ(h, 1);
  }
}

TEST(Parallel, ExceptionsPropagate) {
  ThreadGuard g;
  parallel::set_threads(4);
  EXPECT_THROW(parallel::for_each_index(0, 100,
                                        [](std::size_t i) {
                                          if (i == 77) throw UsageError("boom");
                                        }),
               UsageError);
}

TEST(Parallel, EnvFallback) {
  ::setenv("DEMONPATCH_THREADS", "6", 1);
  EXPECT_EQ(parallel::threads_from_env(1), 6);
  ::setenv("DEMONPATCH_THREADS", "zero", 1);
  EXPECT_EQ(parallel::threads_from_env(3), 3);
  ::setenv("DEMONPATCH_THREADS", "0", 1);
  EXPECT_EQ(parallel::threads_from_env(2), 2);
  ::unsetenv("DEMONPATCH_THREADS");
  EXPECT_EQ(parallel::threads_from_env(5), 5);
}

TEST(Parallel, RegistrationThreadInvariant) {
  ThreadGuard g;
  std::mt19937_64 rng(9);
  // large enough for the row-parallel kernels
  const Plane m = oracle::random_plane(300, 260, rng), s = oracle::random_plane(300, 260, rng);
  RegistrationConfig cfg;
  cfg.iterations = 5;
  parallel::set_threads(1);
  const auto one = demon_register(m, s, cfg);
  parallel::set_threads(7);
  const auto many = demon_register(m, s, cfg);
  EXPECT_EQ(one.total_field, many.total_field);
  EXPECT_EQ(one.mae_history, many.mae_history);
}
