#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "iada/sampling.hpp"
#include "test_util.hpp"

using namespace iada;
using Catch::Approx;

TEST_CASE("allocate_batches fixtures") {
  SECTION("balanced proportions give equal allocation") {
    const auto a = allocate_batches({0.25, 0.25, 0.25, 0.25},
                                    {0.25, 0.25, 0.25, 0.25}, 100, false);
    for (double b : a.b) REQUIRE(b == Approx(a.b[0]).margin(1e-12));
  }
  SECTION("study proportions, raw: b ~ [58.8, 80.9], sum 139.7") {
    const auto a =
        allocate_batches({0.289, 0.711}, {0.453, 0.547}, 100, false);
    REQUIRE(a.b[0] == Approx(58.7956).margin(0.05));
    REQUIRE(a.b[1] == Approx(80.8892).margin(0.05));
    REQUIRE(a.raw_sum() == Approx(139.7).margin(0.1));
    // The raw rule misses its own budget for general proportions.
    REQUIRE(std::fabs(a.raw_sum() - 100.0) > 1.0);
  }
  SECTION("normalized mode hits the budget exactly: [42, 58]") {
    const auto a = allocate_batches({0.289, 0.711}, {0.453, 0.547}, 100, true);
    REQUIRE(a.b_int == std::vector<long>{42, 58});
  }
  SECTION("every class gets at least one sample") {
    const auto a = allocate_batches({0.001, 0.999}, {0.001, 0.999}, 8, true);
    REQUIRE(a.b_int[0] >= 1);
    REQUIRE(a.b_int[0] + a.b_int[1] == 8);
  }
  SECTION("budget below class count rejected") {
    REQUIRE_THROWS_AS(allocate_batches({0.5, 0.5}, {0.5, 0.5}, 1, true),
                      ValueError);
  }
  SECTION("invalid proportions rejected") {
    REQUIRE_THROWS_AS(allocate_batches({0.5, 0.6}, {0.5, 0.5}, 10, true),
                      ValueError);
  }
}

TEST_CASE("raw allocation meets the budget only in the degenerate case") {
  // With one class the raw formula gives b_1 = B exactly.
  const auto single = allocate_batches({0.9999999999}, {0.9999999999}, 50, false);
  REQUIRE(single.b[0] == Approx(50.0).margin(1e-6));
  // The two-class unequal case violates sum b_i = B.
  const auto two = allocate_batches({0.2, 0.8}, {0.3, 0.7}, 50, false);
  REQUIRE(std::fabs(two.raw_sum() - 50.0) > 1e-3);
}

TEST_CASE("balanced batch sampling") {
  const std::vector<int> labels{1, 1, 1, 2, 2};
  const ClassIndex idx(labels, 2);

  SECTION("per-batch counts match the allocation exactly") {
    BatchAllocation alloc;
    alloc.B = 4;
    alloc.normalized = true;
    alloc.b = {2.0, 2.0};
    alloc.b_int = {2, 2};
    Rng rng(3);
    BatchSampler sampler(idx);
    for (int t = 0; t < 200; ++t) {
      const auto batch = sampler.draw(alloc, rng);
      long c1 = 0, c2 = 0;
      for (std::size_t p : batch) (labels[p] == 1 ? c1 : c2)++;
      REQUIRE(c1 == 2);
      REQUIRE(c2 == 2);
    }
  }
  SECTION("no duplicates within a batch when class size permits") {
    BatchAllocation alloc;
    alloc.B = 5;
    alloc.normalized = true;
    alloc.b = {3.0, 2.0};
    alloc.b_int = {3, 2};
    Rng rng(5);
    BatchSampler sampler(idx);
    for (int t = 0; t < 100; ++t) {
      auto batch = sampler.draw(alloc, rng);
      std::sort(batch.begin(), batch.end());
      REQUIRE(std::adjacent_find(batch.begin(), batch.end()) == batch.end());
    }
  }
  SECTION("single-class data with full budget") {
    const std::vector<int> mono{1, 1, 1, 1};
    const ClassIndex midx(mono, 1);
    BatchAllocation alloc;
    alloc.B = 3;
    alloc.normalized = true;
    alloc.b = {3.0};
    alloc.b_int = {3};
    Rng rng(7);
    const auto batch = sample_balanced_batch(midx, alloc, rng);
    REQUIRE(batch.size() == 3);
  }
  SECTION("allocated but empty class rejected") {
    const std::vector<int> missing{1, 1, 1};
    const ClassIndex midx(missing, 2);
    BatchAllocation alloc;
    alloc.B = 4;
    alloc.normalized = true;
    alloc.b = {2.0, 2.0};
    alloc.b_int = {2, 2};
    Rng rng(9);
    REQUIRE_THROWS_AS(sample_balanced_batch(midx, alloc, rng), ValueError);
  }
}

TEST_CASE("within-class sampling is uniform (chi-square at alpha=0.01)") {
  const std::vector<int> labels{1, 1, 1, 2, 2, 2, 2, 2};
  const ClassIndex idx(labels, 2);
  BatchAllocation alloc;
  alloc.B = 4;
  alloc.normalized = true;
  alloc.b = {2.0, 2.0};
  alloc.b_int = {2, 2};

  Rng rng(13);
  BatchSampler sampler(idx);
  std::map<std::size_t, long> counts;
  const int batches = 10000;
  for (int t = 0; t < batches; ++t)
    for (std::size_t p : sampler.draw(alloc, rng)) ++counts[p];

  // Class 1 members (positions 0..2): two draws per batch from three members.
  const double expected_c1 = 2.0 * batches / 3.0;
  double chi2_c1 = 0.0;
  for (std::size_t p = 0; p < 3; ++p) {
    const double diff = static_cast<double>(counts[p]) - expected_c1;
    chi2_c1 += diff * diff / expected_c1;
    // every member frequency within 5% relative of 1/3
    const double freq = static_cast<double>(counts[p]) / (2.0 * batches);
    REQUIRE(std::fabs(freq - 1.0 / 3.0) < 0.05 / 3.0);
  }
  REQUIRE(chi2_c1 < testutil::chi2_critical(2.0, 0.01));

  const double expected_c2 = 2.0 * batches / 5.0;
  double chi2_c2 = 0.0;
  for (std::size_t p = 3; p < 8; ++p) {
    const double diff = static_cast<double>(counts[p]) - expected_c2;
    chi2_c2 += diff * diff / expected_c2;
  }
  REQUIRE(chi2_c2 < testutil::chi2_critical(4.0, 0.01));
}
