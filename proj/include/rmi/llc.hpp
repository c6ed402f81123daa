#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rmi::llc {

using PhysAddr = std::uint64_t;

inline constexpr unsigned kRegionCount = 64;
inline constexpr unsigned kRegionShift = 25;                // 32MB regions
inline constexpr PhysAddr kZeroDeviceBase = PhysAddr{1} << 31;
inline constexpr PhysAddr kAddressLimit = PhysAddr{1} << 32;
// Field widths of one table entry; 64 entries * 19 bits = 1216 bits.
inline constexpr unsigned kBaseBits = 10;
inline constexpr unsigned kSizeBits = 9;

struct Geometry {
    std::size_t cache_bytes = std::size_t{1} << 20;
    unsigned ways = 16;
    unsigned line_bytes = 64;

    std::size_t sets() const { return cache_bytes / (std::size_t{ways} * line_bytes); }
    unsigned offset_bits() const;
    unsigned index_bits() const;
    void validate() const;
};

class LlcError : public std::runtime_error {
public:
    enum class Kind {
        region_out_of_range,
        overlapping_ranges,
        exceeds_capacity,
        enclaves_running,
        sm_region_modified,
        field_overflow,
        invalid_geometry,
        malformed_table,
    };
    LlcError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const { return kind_; }
    std::string_view kind_name() const;

private:
    Kind kind_;
};

struct Entry {
    std::uint32_t base = 0;
    std::uint32_t size = 0;

    friend bool operator==(const Entry&, const Entry&) = default;
};

struct PartitionTable {
    Geometry geometry;
    std::array<std::optional<Entry>, kRegionCount> entries{};
    // Regions owned by the security monitor; reconfiguration may not touch them.
    std::set<unsigned> sm_regions;

    // Throws field_overflow, exceeds_capacity or overlapping_ranges.
    void validate() const;
    const Entry& entry(unsigned region) const;
};

// Table from JSON text: {"geometry": {...}?, "sm_regions": [..]?, "regions": {"<id>": {"base": b, "size": s}}}.
// A bare object of "<id>": {base, size} members is accepted as well.
PartitionTable parse_table(std::string_view json_text);
std::string table_to_json(const PartitionTable& table);

unsigned region_of(PhysAddr address);
bool is_zero_device(PhysAddr address);
std::uint64_t original_index(PhysAddr address, const Geometry& g);

struct Mapping {
    unsigned region = 0;
    std::size_t set = 0;
    std::uint64_t tag = 0;  // line address: the whole original index plus upper bits
    bool zero_device = false;
};

// Throws region_out_of_range for addresses past the modeled space or in an
// unconfigured region.
Mapping remap_set_index(PhysAddr address, const PartitionTable& table);

struct Line {
    bool valid = false;
    std::uint64_t tag = 0;
    unsigned region = 0;
    bool zero_fill = false;
    std::uint64_t last_use = 0;
};

struct AccessResult {
    bool hit = false;
    std::size_t set = 0;
    std::optional<Line> evicted;
};

class CacheState {
public:
    explicit CacheState(const Geometry& g = {});

    AccessResult access(PhysAddr address, const PartitionTable& table);

    const Geometry& geometry() const { return geometry_; }
    const std::vector<Line>& set(std::size_t index) const { return sets_.at(index); }
    std::size_t valid_data_lines(unsigned region) const;
    std::size_t valid_lines() const;

private:
    Geometry geometry_;
    std::vector<std::vector<Line>> sets_;
    std::uint64_t clock_ = 0;
};

// Zero-device addresses covering every (set, way) of the region's range.
std::vector<PhysAddr> eviction_set(unsigned region, const PartitionTable& table);
std::size_t flush_cost(unsigned region, const PartitionTable& table);

struct FlushResult {
    std::size_t accesses = 0;
    std::size_t evicted_data_lines = 0;
};

FlushResult flush_region(unsigned region, CacheState& cache, const PartitionTable& table);

// Configuration protocol: validates `proposed` against `current`, flushes the
// old ranges of every changed region, and returns the table now in effect.
PartitionTable configure(const PartitionTable& current, const PartitionTable& proposed, unsigned running_enclaves,
                         CacheState& cache);

}  // namespace rmi::llc
