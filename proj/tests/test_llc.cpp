#include <doctest.h>

#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "rmi/llc.hpp"

using namespace rmi::llc;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

PartitionTable enclave_split() { return parse_table(read_file(RMI_SOURCE_DIR "/layouts/enclave_split.json")); }

PartitionTable two_regions() {
    PartitionTable t;
    t.entries[1] = Entry{0, 256};
    t.entries[2] = Entry{256, 256};
    return t;
}

// A data address in `region` with the given original index and tag bits.
PhysAddr data_address(unsigned region, std::uint64_t index, std::uint64_t high) {
    return (PhysAddr{region} << kRegionShift) | (high << 16) | (index << 6);
}

LlcError::Kind error_of(auto&& f) {
    try {
        f();
    } catch (const LlcError& e) {
        return e.kind();
    }
    FAIL("no LlcError");
    return LlcError::Kind::malformed_table;
}

}  // namespace

TEST_CASE("default geometry") {
    const Geometry g;
    CHECK(g.sets() == 1024);
    CHECK(g.offset_bits() == 6);
    CHECK(g.index_bits() == 10);
    Geometry bad;
    bad.line_bytes = 48;
    CHECK(error_of([&] { bad.validate(); }) == LlcError::Kind::invalid_geometry);
}

TEST_CASE("set index remapping") {
    PartitionTable t;
    t.entries[3] = Entry{8, 4};
    t.entries[4] = Entry{12, 1};
    const auto m = remap_set_index(data_address(3, 5, 0), t);
    CHECK(m.region == 3);
    CHECK(m.set == 9);
    CHECK_FALSE(m.zero_device);
    for (std::uint64_t i = 0; i < 1024; i += 37) CHECK(remap_set_index(data_address(4, i, 1), t).set == 12);
    // Addresses sharing a remapped set keep distinct tags.
    CHECK(remap_set_index(data_address(3, 1, 0), t).tag != m.tag);

    CHECK(error_of([&] { remap_set_index(data_address(7, 0, 0), t); }) == LlcError::Kind::region_out_of_range);
    CHECK(error_of([&] { remap_set_index(PhysAddr{1} << 32, t); }) == LlcError::Kind::region_out_of_range);
    const auto z = remap_set_index(kZeroDeviceBase + data_address(3, 2, 0), t);
    CHECK(z.zero_device);
    CHECK(z.region == 3);
    CHECK(z.set == 10);
}

TEST_CASE("table validation") {
    PartitionTable t = two_regions();
    CHECK_NOTHROW(t.validate());
    t.entries[3] = Entry{600, 20};
    CHECK_NOTHROW(t.validate());
    t.entries[4] = Entry{300, 20};
    CHECK(error_of([&] { t.validate(); }) == LlcError::Kind::overlapping_ranges);
    t.entries[4] = Entry{1020, 8};
    CHECK(error_of([&] { t.validate(); }) == LlcError::Kind::exceeds_capacity);
    t.entries[4] = Entry{700, 0};
    CHECK(error_of([&] { t.validate(); }) == LlcError::Kind::field_overflow);
    t.entries[4] = Entry{1024, 1};
    CHECK(error_of([&] { t.validate(); }) == LlcError::Kind::field_overflow);
    t.entries[4] = Entry{0, 512};
    CHECK(error_of([&] { t.validate(); }) == LlcError::Kind::field_overflow);
}

TEST_CASE("every overlapping pair is rejected") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 300; ++i) {
        PartitionTable t;
        const std::uint32_t base = static_cast<std::uint32_t>(rng() % 900);
        const std::uint32_t size = 1 + static_cast<std::uint32_t>(rng() % 100);
        const std::uint32_t other = base + static_cast<std::uint32_t>(rng() % size);
        t.entries[rng() % 32] = Entry{base, size};
        t.entries[32 + rng() % 32] = Entry{other, 1 + static_cast<std::uint32_t>(rng() % 50)};
        CHECK(error_of([&] { t.validate(); }) == LlcError::Kind::overlapping_ranges);
    }
}

TEST_CASE("layout file") {
    const auto t = enclave_split();
    CHECK_NOTHROW(t.validate());
    CHECK(t.sm_regions == std::set<unsigned>{0});
    CHECK(flush_cost(2, t) == 4096);
    CHECK(flush_cost(5, t) == 16);
    CHECK(flush_cost(0, t) == 256);
    CHECK(parse_table(table_to_json(t)).entries == t.entries);

    CHECK(error_of([] { parse_table("[1, 2]"); }) == LlcError::Kind::malformed_table);
    CHECK(error_of([] { parse_table(R"({"64": {"base": 0, "size": 1}})"); }) == LlcError::Kind::malformed_table);
    CHECK(error_of([] { parse_table(R"({"1": {"base": 0}})"); }) == LlcError::Kind::malformed_table);
    CHECK(error_of([] { parse_table("{"); }) == LlcError::Kind::malformed_table);
    const auto bare = parse_table(R"({"7": {"base": 3, "size": 2}})");
    CHECK(bare.entries[7] == Entry{3, 2});
}

TEST_CASE("eviction sets map onto every way of the region's sets") {
    const auto t = enclave_split();
    for (unsigned region : {0u, 2u, 5u}) {
        const auto set = eviction_set(region, t);
        CHECK(set.size() == flush_cost(region, t));
        std::map<std::size_t, std::set<std::uint64_t>> tags;
        for (auto a : set) {
            const auto m = remap_set_index(a, t);
            CHECK(m.zero_device);
            CHECK(m.region == region);
            tags[m.set].insert(m.tag);
        }
        CHECK(tags.size() == t.entry(region).size);
        for (const auto& [s, ts] : tags) CHECK(ts.size() == t.geometry.ways);
    }
}

TEST_CASE("flush invalidates every data line of the region") {
    PartitionTable t;
    t.entries[1] = Entry{0, 4};
    t.entries[2] = Entry{4, 4};
    CacheState cache;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 400; ++i) {
        cache.access(data_address(1, rng() % 1024, rng() % 64), t);
        cache.access(data_address(2, rng() % 1024, rng() % 64), t);
    }
    REQUIRE(cache.valid_data_lines(1) == 64);
    const auto r = flush_region(1, cache, t);
    CHECK(r.accesses == 64);
    CHECK(r.evicted_data_lines == 64);
    CHECK(cache.valid_data_lines(1) == 0);
    CHECK(cache.valid_data_lines(2) == 64);
    // A second flush evicts its own zero lines only.
    CHECK(flush_region(1, cache, t).evicted_data_lines == 0);
}

TEST_CASE("flush cost grows with the region") {
    PartitionTable t;
    std::size_t last = 0;
    for (std::uint32_t size = 1; size < 512; size += 17) {
        t.entries[9] = Entry{0, size};
        const auto c = flush_cost(9, t);
        CHECK(c == std::size_t{size} * 16);
        CHECK(c > last);
        last = c;
    }
}

TEST_CASE("regions never disturb each other") {
    const auto t = enclave_split();
    std::mt19937_64 rng(17);
    for (int round = 0; round < 50; ++round) {
        CacheState cache;
        const unsigned victim = static_cast<unsigned>(rng() % kRegionCount);
        for (int i = 0; i < 300; ++i) cache.access(data_address(victim, rng() % 1024, rng() % 32), t);
        std::vector<std::vector<Line>> before;
        const auto& e = t.entry(victim);
        for (std::size_t s = e.base; s < e.base + e.size; ++s) before.push_back(cache.set(s));
        for (int i = 0; i < 2000; ++i) {
            unsigned other = static_cast<unsigned>(rng() % kRegionCount);
            if (other == victim) continue;
            const bool zero = rng() % 4 == 0;
            const auto a = data_address(other, rng() % 1024, rng() % 64) + (zero ? kZeroDeviceBase : 0);
            const auto res = cache.access(a, t);
            CHECK((res.set < e.base || res.set >= e.base + e.size));
            if (res.evicted) CHECK(res.evicted->region != victim);
        }
        for (std::size_t s = e.base; s < e.base + e.size; ++s) {
            const auto& now = cache.set(s);
            const auto& then = before[s - e.base];
            for (std::size_t w = 0; w < now.size(); ++w) {
                CHECK(now[w].valid == then[w].valid);
                CHECK(now[w].tag == then[w].tag);
            }
        }
    }
}

TEST_CASE("configure protocol") {
    const auto current = enclave_split();
    CacheState cache;
    std::mt19937_64 rng(5);
    for (int i = 0; i < 3000; ++i) cache.access(data_address(1 + rng() % 4, rng() % 1024, rng() % 64), current);
    const auto kept2 = cache.valid_data_lines(2);
    REQUIRE(cache.valid_data_lines(1) > 0);
    REQUIRE(kept2 > 0);

    SUBCASE("changed regions are flushed, others kept") {
        auto proposed = current;
        proposed.entries[1] = Entry{16, 64};
        proposed.entries[6].reset();
        const auto now = configure(current, proposed, 0, cache);
        CHECK(now.entries[1] == Entry{16, 64});
        CHECK(cache.valid_data_lines(1) == 0);
        CHECK(cache.valid_data_lines(2) == kept2);
    }
    SUBCASE("running enclaves") {
        auto proposed = current;
        proposed.entries[1] = Entry{16, 64};
        CHECK(error_of([&] { configure(current, proposed, 2, cache); }) == LlcError::Kind::enclaves_running);
        CHECK(cache.valid_data_lines(1) > 0);
    }
    SUBCASE("monitor region") {
        auto proposed = current;
        proposed.entries[0] = Entry{0, 8};
        CHECK(error_of([&] { configure(current, proposed, 0, cache); }) == LlcError::Kind::sm_region_modified);
        proposed = current;
        proposed.sm_regions.clear();
        CHECK(error_of([&] { configure(current, proposed, 0, cache); }) == LlcError::Kind::sm_region_modified);
    }
    SUBCASE("overlap") {
        auto proposed = current;
        proposed.entries[3] = Entry{140, 10};
        CHECK(error_of([&] { configure(current, proposed, 0, cache); }) == LlcError::Kind::overlapping_ranges);
        CHECK(cache.valid_data_lines(3) > 0);
    }
    SUBCASE("geometry") {
        auto proposed = current;
        proposed.geometry.ways = 8;
        CHECK(error_of([&] { configure(current, proposed, 0, cache); }) == LlcError::Kind::invalid_geometry);
    }
}
