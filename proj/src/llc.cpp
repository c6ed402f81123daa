#include "rmi/llc.hpp"

#include <algorithm>
#include <bit>
#include <json.hpp>

namespace rmi::llc {

using nlohmann::json;

std::string_view LlcError::kind_name() const {
    switch (kind_) {
        case Kind::region_out_of_range: return "RegionOutOfRange";
        case Kind::overlapping_ranges: return "OverlappingRanges";
        case Kind::exceeds_capacity: return "ExceedsCapacity";
        case Kind::enclaves_running: return "EnclavesRunning";
        case Kind::sm_region_modified: return "SmRegionModified";
        case Kind::field_overflow: return "FieldOverflow";
        case Kind::invalid_geometry: return "InvalidGeometry";
        case Kind::malformed_table: return "MalformedTable";
    }
    return "?";
}

unsigned Geometry::offset_bits() const { return static_cast<unsigned>(std::countr_zero(line_bytes)); }
unsigned Geometry::index_bits() const { return static_cast<unsigned>(std::countr_zero(sets())); }

void Geometry::validate() const {
    const bool ok = ways > 0 && std::has_single_bit(line_bytes) && std::has_single_bit(cache_bytes) &&
                    cache_bytes >= std::size_t{ways} * line_bytes && std::has_single_bit(sets()) &&
                    // Eviction-set addresses stay inside one 32MB region.
                    std::size_t{ways} * sets() * line_bytes <= (std::size_t{1} << kRegionShift);
    if (!ok) throw LlcError(LlcError::Kind::invalid_geometry, "unsupported cache geometry");
}

void PartitionTable::validate() const {
    geometry.validate();
    const std::size_t total = geometry.sets();
    std::vector<int> owner(total, -1);
    std::size_t used = 0;
    for (unsigned r = 0; r < kRegionCount; ++r) {
        if (!entries[r]) continue;
        const auto& e = *entries[r];
        if (e.size == 0 || e.base >= (1u << kBaseBits) || e.size >= (1u << kSizeBits))
            throw LlcError(LlcError::Kind::field_overflow,
                           "region " + std::to_string(r) + ": base/size do not fit the 10+9 bit entry");
        if (std::size_t{e.base} + e.size > total)
            throw LlcError(LlcError::Kind::exceeds_capacity,
                           "region " + std::to_string(r) + " extends past set " + std::to_string(total - 1));
        for (std::size_t s = e.base; s < std::size_t{e.base} + e.size; ++s) {
            if (owner[s] >= 0)
                throw LlcError(LlcError::Kind::overlapping_ranges, "regions " + std::to_string(owner[s]) + " and " +
                                                                       std::to_string(r) + " share set " +
                                                                       std::to_string(s));
            owner[s] = static_cast<int>(r);
        }
        used += e.size;
    }
    if (used > total) throw LlcError(LlcError::Kind::exceeds_capacity, "table uses more sets than the cache has");
}

const Entry& PartitionTable::entry(unsigned region) const {
    if (region >= kRegionCount || !entries[region])
        throw LlcError(LlcError::Kind::region_out_of_range, "region " + std::to_string(region) + " is not configured");
    return *entries[region];
}

namespace {

unsigned region_id(const std::string& key) {
    std::size_t pos = 0;
    unsigned long id = 0;
    try {
        id = std::stoul(key, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != key.size() || id >= kRegionCount)
        throw LlcError(LlcError::Kind::malformed_table, "bad region id '" + key + "'");
    return static_cast<unsigned>(id);
}

}  // namespace

PartitionTable parse_table(std::string_view json_text) {
    PartitionTable t;
    try {
        const json doc = json::parse(json_text);
        if (!doc.is_object()) throw LlcError(LlcError::Kind::malformed_table, "table must be a JSON object");
        const json* regions = &doc;
        if (doc.contains("regions")) {
            regions = &doc.at("regions");
            if (doc.contains("geometry")) {
                const auto& g = doc.at("geometry");
                t.geometry.cache_bytes = g.value("cache_bytes", t.geometry.cache_bytes);
                t.geometry.ways = g.value("ways", t.geometry.ways);
                t.geometry.line_bytes = g.value("line_bytes", t.geometry.line_bytes);
            }
            for (const auto& r : doc.value("sm_regions", json::array())) t.sm_regions.insert(r.get<unsigned>());
        }
        for (const auto& [key, value] : regions->items())
            t.entries[region_id(key)] = Entry{value.at("base").get<std::uint32_t>(), value.at("size").get<std::uint32_t>()};
    } catch (const json::exception& e) {
        throw LlcError(LlcError::Kind::malformed_table, e.what());
    }
    return t;
}

std::string table_to_json(const PartitionTable& table) {
    json regions = json::object();
    for (unsigned r = 0; r < kRegionCount; ++r)
        if (table.entries[r]) regions[std::to_string(r)] = {{"base", table.entries[r]->base}, {"size", table.entries[r]->size}};
    json doc = {{"geometry",
                 {{"cache_bytes", table.geometry.cache_bytes},
                  {"ways", table.geometry.ways},
                  {"line_bytes", table.geometry.line_bytes}}},
                {"sm_regions", table.sm_regions},
                {"regions", regions}};
    return doc.dump(2);
}

unsigned region_of(PhysAddr address) { return static_cast<unsigned>((address >> kRegionShift) & (kRegionCount - 1)); }

bool is_zero_device(PhysAddr address) { return address < kAddressLimit && (address & kZeroDeviceBase) != 0; }

std::uint64_t original_index(PhysAddr address, const Geometry& g) {
    return (address >> g.offset_bits()) & (g.sets() - 1);
}

Mapping remap_set_index(PhysAddr address, const PartitionTable& table) {
    if (address >= kAddressLimit)
        throw LlcError(LlcError::Kind::region_out_of_range, "address beyond the modeled physical space");
    Mapping m;
    m.region = region_of(address);
    const auto& e = table.entry(m.region);
    m.set = e.base + original_index(address, table.geometry) % e.size;
    m.tag = address >> table.geometry.offset_bits();
    m.zero_device = is_zero_device(address);
    return m;
}

CacheState::CacheState(const Geometry& g) : geometry_(g) {
    geometry_.validate();
    sets_.assign(geometry_.sets(), std::vector<Line>(geometry_.ways));
}

AccessResult CacheState::access(PhysAddr address, const PartitionTable& table) {
    const auto m = remap_set_index(address, table);
    auto& lines = sets_.at(m.set);
    AccessResult r;
    r.set = m.set;
    ++clock_;
    for (auto& l : lines) {
        if (l.valid && l.tag == m.tag) {
            l.last_use = clock_;
            r.hit = true;
            return r;
        }
    }
    auto victim = std::find_if(lines.begin(), lines.end(), [](const Line& l) { return !l.valid; });
    if (victim == lines.end()) {
        victim = std::min_element(lines.begin(), lines.end(),
                                  [](const Line& a, const Line& b) { return a.last_use < b.last_use; });
        r.evicted = *victim;
    }
    *victim = Line{true, m.tag, m.region, m.zero_device, clock_};
    return r;
}

std::size_t CacheState::valid_data_lines(unsigned region) const {
    std::size_t n = 0;
    for (const auto& s : sets_)
        for (const auto& l : s) n += l.valid && !l.zero_fill && l.region == region;
    return n;
}

std::size_t CacheState::valid_lines() const {
    std::size_t n = 0;
    for (const auto& s : sets_)
        for (const auto& l : s) n += l.valid;
    return n;
}

std::vector<PhysAddr> eviction_set(unsigned region, const PartitionTable& table) {
    const auto& e = table.entry(region);
    const auto& g = table.geometry;
    // k selects the set through the original index, w the way through upper tag bits.
    const PhysAddr way_stride = PhysAddr{g.sets()} * g.line_bytes;
    const PhysAddr base = kZeroDeviceBase + (PhysAddr{region} << kRegionShift);
    std::vector<PhysAddr> out;
    out.reserve(std::size_t{e.size} * g.ways);
    for (unsigned w = 0; w < g.ways; ++w)
        for (std::uint32_t k = 0; k < e.size; ++k) out.push_back(base + w * way_stride + PhysAddr{k} * g.line_bytes);
    return out;
}

std::size_t flush_cost(unsigned region, const PartitionTable& table) {
    return std::size_t{table.entry(region).size} * table.geometry.ways;
}

FlushResult flush_region(unsigned region, CacheState& cache, const PartitionTable& table) {
    FlushResult r;
    for (auto a : eviction_set(region, table)) {
        const auto res = cache.access(a, table);
        ++r.accesses;
        if (res.evicted && !res.evicted->zero_fill) ++r.evicted_data_lines;
    }
    return r;
}

PartitionTable configure(const PartitionTable& current, const PartitionTable& proposed, unsigned running_enclaves,
                         CacheState& cache) {
    if (running_enclaves != 0)
        throw LlcError(LlcError::Kind::enclaves_running,
                       std::to_string(running_enclaves) + " enclave(s) running; reconfiguration refused");
    proposed.validate();
    if (proposed.geometry.sets() != current.geometry.sets() || proposed.geometry.ways != current.geometry.ways ||
        proposed.geometry.line_bytes != current.geometry.line_bytes)
        throw LlcError(LlcError::Kind::invalid_geometry, "geometry cannot change at runtime");
    if (proposed.sm_regions != current.sm_regions)
        throw LlcError(LlcError::Kind::sm_region_modified, "the set of monitor regions changed");
    for (auto r : current.sm_regions)
        if (proposed.entries[r] != current.entries[r])
            throw LlcError(LlcError::Kind::sm_region_modified, "monitor region " + std::to_string(r) + " changed");
    for (unsigned r = 0; r < kRegionCount; ++r)
        if (current.entries[r] && proposed.entries[r] != current.entries[r]) flush_region(r, cache, current);
    return proposed;
}

}  // namespace rmi::llc
