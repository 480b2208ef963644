#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "streamx/agents.hpp"
#include "streamx/net.hpp"

namespace streamx {

/// `.netsnap` container:
///   8 bytes  magic "NETSNAP1"
///   8 bytes  header length H (uint64, little-endian)
///   H bytes  UTF-8 JSON header: {"arrays": [{name, offset, count, ...}], "meta": {...}}
///   rest     float64 payload, little-endian, arrays back to back
struct SnapshotArray {
    std::string name;
    std::vector<double> values;
    std::vector<LayerSpec> layers;  // non-empty when the array holds network parameters
};

struct Snapshot {
    std::string meta_json = "{}";  // free-form JSON object
    std::vector<SnapshotArray> arrays;

    const SnapshotArray& array(const std::string& name) const;
};

void write_snapshot(const Snapshot& snap, const std::filesystem::path& path);
Snapshot read_snapshot(const std::filesystem::path& path);

void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

/// Networks, scaler statistics and the step counter of `agent`.
void save_checkpoint(const AnyAgent& agent, const std::filesystem::path& path);
/// Restores into an agent built with the same kind and shapes.
void load_checkpoint(AnyAgent& agent, const std::filesystem::path& path);

}  // namespace streamx
