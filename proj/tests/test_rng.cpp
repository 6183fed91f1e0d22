#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

#include "pshuf/rng.hpp"

using pshuf::RngStream;
using pshuf::derive_stream;
using pshuf::splitmix64_mix;

TEST_CASE("splitmix64 reference sequence from state 0") {
    RngStream s{0};
    CHECK(s.next_u64() == 0xE220A8397B1DCDAFULL);
    CHECK(s.next_u64() == 0x6E789E6AA1B965F4ULL);
    CHECK(s.next_u64() == 0x06C45D188009454FULL);
    CHECK(s.next_u64() == 0xF88BB8A8724C81ECULL);
}

TEST_CASE("derive_stream states match the reference construction") {
    CHECK(derive_stream(42, 0).state() == 0x4D9B3F1EC9CF6B1BULL);
    CHECK(derive_stream(42, 1).state() == 0x7EB3B394AC9EFC29ULL);
    CHECK(derive_stream(0, 0).state() == 0xA706DD2F4D197E6FULL);
    CHECK(derive_stream(123456789, 7).state() == 0x54976F5A8247C29AULL);
    // definition: mix(seed ^ mix(epoch))
    CHECK(derive_stream(42, 7).state() == splitmix64_mix(42 ^ splitmix64_mix(7)));
}

TEST_CASE("golden vector fixture replays bit-exactly") {
    std::ifstream in(std::string(FIXTURES_DIR) + "/splitmix64_golden.txt");
    REQUIRE(in.good());

    std::string line;
    int checked = 0;
    std::uint64_t cur_seed = 0;
    std::uint64_t cur_epoch = 0;
    RngStream stream{0};
    bool have_stream = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::istringstream fields(line);
        std::uint64_t seed;
        std::uint64_t epoch;
        std::uint64_t draw_index;
        std::uint64_t value;
        REQUIRE(static_cast<bool>(fields >> seed >> epoch >> draw_index >> value));
        if (!have_stream || seed != cur_seed || epoch != cur_epoch) {
            stream = derive_stream(seed, epoch);
            cur_seed = seed;
            cur_epoch = epoch;
            have_stream = true;
            REQUIRE(draw_index == 0);
        }
        CHECK(stream.next_u64() == value);
        ++checked;
    }
    CHECK(checked == 48);
}

TEST_CASE("next_bounded") {
    SUBCASE("bound 1 always yields 0") {
        RngStream s = derive_stream(99, 4);
        for (int i = 0; i < 32; ++i) {
            CHECK(s.next_bounded(1) == 0);
        }
    }
    SUBCASE("bound 6 from state 0 is the reference value mod 6") {
        RngStream s{0};
        CHECK(s.next_bounded(6) == 0xE220A8397B1DCDAFULL % 6);  // == 1
    }
    SUBCASE("bound 0 is rejected") {
        RngStream s{0};
        CHECK_THROWS_AS(s.next_bounded(0), std::invalid_argument);
    }
}

TEST_CASE("re-created stream replays the identical sequence") {
    RngStream a = derive_stream(7, 3);
    std::vector<std::uint64_t> first;
    for (int i = 0; i < 10; ++i) {
        first.push_back(a.next_u64());
    }
    RngStream b = derive_stream(7, 3);
    for (int i = 0; i < 10; ++i) {
        CHECK(b.next_u64() == first[i]);
    }
}

TEST_CASE("epoch streams differ from the first draw") {
    for (std::uint64_t seed : {0ULL, 42ULL, 0xDEADBEEFULL}) {
        RngStream a = derive_stream(seed, 0);
        RngStream b = derive_stream(seed, 1);
        CHECK(a.next_u64() != b.next_u64());
    }
}

TEST_CASE("chi-square uniformity of bounded draws") {
    constexpr int kBuckets = 6;
    constexpr int kDraws = 1000000;
    RngStream s = derive_stream(2024, 0);
    std::array<int, kBuckets> counts{};
    for (int i = 0; i < kDraws; ++i) {
        ++counts[s.next_bounded(kBuckets)];
    }
    const double expected = static_cast<double>(kDraws) / kBuckets;
    double chi2 = 0.0;
    for (const int c : counts) {
        const double d = c - expected;
        chi2 += d * d / expected;
    }
    // chi-square critical value, df = 5, significance 0.001
    CHECK(chi2 < 20.515);
}

TEST_CASE("unit doubles stay in [0, 1)") {
    RngStream s = derive_stream(5, 5);
    for (int i = 0; i < 1000; ++i) {
        const double u = s.next_unit_double();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}
