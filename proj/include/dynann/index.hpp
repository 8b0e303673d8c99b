#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dynann/core.hpp"
#include "dynann/neighbours.hpp"

namespace dynann {

// Method parameters are carried as an ordered name -> scalar map so sweeps
// can be described in config files and rendered canonically in reports.
using ParamValue = std::variant<std::int64_t, double, bool, std::string>;
using ParamMap = std::map<std::string, ParamValue>;

std::int64_t param_int(const ParamMap& params, const std::string& name, std::int64_t fallback);
double param_double(const ParamMap& params, const std::string& name, double fallback);
bool param_bool(const ParamMap& params, const std::string& name, bool fallback);

// "a=1;b=2.5" with keys in map order; the canonical form used in CSV rows
// and log lines.
std::string format_params(const ParamMap& params);

// Counts of structural problems found by an index's self-check.  Healthy
// structures report all() == 0; tests assert that.
struct AuditReport {
    std::uint64_t violations = 0;
    std::vector<std::string> notes;

    void flag(std::string note) {
        ++violations;
        if (notes.size() < 32) notes.push_back(std::move(note));
    }
};

// Contract shared by every search structure in the suite, the exhaustive
// baseline included.  The driving loop owns the DatasetStore and applies
// each event to it first; insert()/update() then tell the index which id
// changed, and the index reads the payload back from the store.  search()
// may mutate internal scratch, so it is not const.
class DynamicIndex {
public:
    virtual ~DynamicIndex() = default;

    virtual std::string name() const = 0;

    // (Re)builds from the store's current contents, discarding prior state.
    // The index keeps the store pointer for the rest of its life.
    virtual void build(const DatasetStore& store) = 0;

    // A vector with this id was appended to the store.
    virtual void insert(VectorId id) = 0;

    // The payload of this existing id was overwritten in the store.
    virtual void update(VectorId id) = 0;

    virtual NeighbourList search(std::span<const float> query, std::size_t k) = 0;

    // Periodic maintenance hook, called by the driver between event blocks.
    // Returns true if structural work (a rebuild, a retrain) was done.
    virtual bool maintain() { return false; }

    virtual std::size_t memory_bytes() const = 0;

    virtual AuditReport audit() const { return {}; }
};

// Known method names: "baseline", "kdtree", "rpforest", "hnsw", "ivfpq".
// Unknown names or parameter values out of range throw std::invalid_argument.
std::unique_ptr<DynamicIndex> make_index(const std::string& method, const ParamMap& params,
                                         std::uint64_t seed);

std::vector<std::string> known_methods();

}  // namespace dynann
