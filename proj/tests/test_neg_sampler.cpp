#include <catch2/catch_amalgamated.hpp>

#include "cemb/neg_sampler.hpp"
#include "testutil.hpp"

using namespace cemb;

TEST_CASE("weights follow the clamped frequency formula", "[sampler]") {
    // counts 100/100 of 200: w = 1 - sqrt(1e-5 / 0.5) each, p = 0.5 each
    std::vector<Count> counts{100, 100};
    auto t = SamplingTable::build(counts, 200);
    CHECK(t.probability(0) == Catch::Approx(0.5).margin(1e-12));
    CHECK(t.probability(1) == Catch::Approx(0.5).margin(1e-12));

    // unnormalized weight check: f = 4e-5 gives w = 1 - sqrt(0.25) = 0.5,
    // paired with an f = 1 item of weight 1 - sqrt(1e-5).
    std::vector<Count> c2{4, 99996};
    auto t2 = SamplingTable::build(c2, 100000);
    const double w_small = 0.5;
    const double w_big = 1.0 - std::sqrt(1e-5 / 0.99996);
    CHECK(t2.probability(0) == Catch::Approx(w_small / (w_small + w_big)).margin(1e-9));
}

TEST_CASE("frequency exactly at the floor gets weight zero", "[sampler]") {
    // 1/100000 is the same double as 1e-5, so the weight is exactly 0.
    std::vector<Count> counts{1, 99999};
    auto t = SamplingTable::build(counts, 100000);
    CHECK(t.probability(0) == 0.0);
    Rng rng(3);
    for (int i = 0; i < 20000; ++i) CHECK(t.draw(rng) == 1);
}

TEST_CASE("all-zero weights is a fatal error with guidance", "[sampler]") {
    std::vector<Count> counts{1, 1};
    CHECK_THROWS_WITH(SamplingTable::build(counts, 200000),
                      Catch::Matchers::ContainsSubstring("neg_sample_floor"));
    // zero total
    CHECK_THROWS_AS(SamplingTable::build(std::vector<Count>{0, 0}, 0),
                    std::invalid_argument);
}

TEST_CASE("counts never invert the weight order", "[sampler]") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Count> counts(20);
        Count total = 0;
        for (auto& c : counts) {
            c = rng.below(1000);
            total += c;
        }
        if (total == 0) continue;
        SamplingTable t;
        try {
            t = SamplingTable::build(counts, total);
        } catch (const std::runtime_error&) {
            continue;  // all below floor
        }
        for (std::size_t a = 0; a < counts.size(); ++a)
            for (std::size_t b = 0; b < counts.size(); ++b)
                if (counts[a] > counts[b])
                    CHECK(t.probability(a) >= t.probability(b));
    }
}

TEST_CASE("exclusion forces the remaining support", "[sampler]") {
    std::vector<Count> counts{500, 500};
    auto t = SamplingTable::build(counts, 1000);
    Rng rng(5);
    const Index a = 0;
    auto draws = t.draw(rng, 200, {&a, 1});
    for (Index d : draws) CHECK(d == 1);
}

TEST_CASE("exclusion covering the support errors out", "[sampler]") {
    std::vector<Count> counts{500, 500};
    auto t = SamplingTable::build(counts, 1000);
    Rng rng(5);
    std::vector<Index> all{0, 1};
    CHECK_THROWS_AS(t.draw(rng, 1, all), std::runtime_error);
}

TEST_CASE("draw sequences are deterministic per seed", "[sampler]") {
    std::vector<Count> counts{10, 30, 60, 200, 700};
    auto t = SamplingTable::build(counts, 1000);
    Rng r1(42), r2(42), r3(43);
    auto d1 = t.draw(r1, 500);
    auto d2 = t.draw(r2, 500);
    auto d3 = t.draw(r3, 500);
    CHECK(d1 == d2);
    CHECK(d1 != d3);
}

TEST_CASE("empirical frequencies match the table on the 50/50 case", "[sampler]") {
    std::vector<Count> counts{100, 100};
    auto t = SamplingTable::build(counts, 200);
    Rng rng(7);
    std::size_t ones = 0;
    const std::size_t n = 1000000;
    for (std::size_t i = 0; i < n; ++i) ones += t.draw(rng);
    const double freq = static_cast<double>(ones) / static_cast<double>(n);
    CHECK(freq == Catch::Approx(0.5).margin(0.002));
}

TEST_CASE("chi-square goodness of fit on a Zipf table", "[sampler]") {
    const std::size_t n_items = 200;
    std::vector<Count> counts(n_items);
    Count total = 0;
    for (std::size_t i = 0; i < n_items; ++i) {
        counts[i] = static_cast<Count>(100000.0 / static_cast<double>(i + 1)) + 1;
        total += counts[i];
    }
    auto t = SamplingTable::build(counts, total);
    Rng rng(11);
    std::vector<std::uint64_t> observed(n_items, 0);
    const std::uint64_t n_draws = 1000000;
    for (std::uint64_t i = 0; i < n_draws; ++i) observed[t.draw(rng)]++;
    std::vector<double> probs(n_items);
    for (std::size_t i = 0; i < n_items; ++i) probs[i] = t.probability(i);
    const double p = testutil::chi2_gof_pvalue(observed, probs, n_draws);
    CHECK(p > 0.001);
}

TEST_CASE("zero-weight indices never appear in draws", "[sampler]") {
    // several items pinned exactly at the floor frequency
    std::vector<Count> counts{1, 1, 49998, 25000, 25000};
    auto t = SamplingTable::build(counts, 100000);
    CHECK(t.probability(0) == 0.0);
    CHECK(t.probability(1) == 0.0);
    Rng rng(13);
    for (int i = 0; i < 200000; ++i) {
        Index d = t.draw(rng);
        CHECK(d >= 2);
    }
}
