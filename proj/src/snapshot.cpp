#include "streamx/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace streamx {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'N', 'E', 'T', 'S', 'N', 'A', 'P', '1'};

std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return out;
}

void put_u64(std::ostream& out, std::uint64_t v) {
    v = to_le(v);
    out.write(reinterpret_cast<const char*>(&v), 8);
}

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw std::runtime_error("netsnap: truncated file");
    return to_le(v);
}

json layers_to_json(const std::vector<LayerSpec>& layers) {
    json out = json::array();
    for (const auto& l : layers) {
        out.push_back({{"in", l.input_width},
                       {"out", l.output_width},
                       {"layernorm", l.has_layernorm},
                       {"activation", l.activation == Activation::LeakyReLU ? "leaky_relu" : "identity"}});
    }
    return out;
}

std::vector<LayerSpec> layers_from_json(const json& j) {
    std::vector<LayerSpec> layers;
    for (const auto& l : j) {
        const auto act = l.at("activation").get<std::string>();
        if (act != "leaky_relu" && act != "identity") throw std::runtime_error("netsnap: unknown activation " + act);
        layers.push_back({l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(), l.at("layernorm").get<bool>(),
                          act == "leaky_relu" ? Activation::LeakyReLU : Activation::Identity});
    }
    return layers;
}

SnapshotArray network_array(const std::string& name, const Network& net) {
    return {name, {net.params().begin(), net.params().end()}, net.layers()};
}

void restore_network(Network& net, const Snapshot& snap, const std::string& name) {
    const auto& a = snap.array(name);
    if (a.layers != net.layers()) throw std::runtime_error("netsnap: network '" + name + "' has a different shape");
    net.set_params(a.values);
}

void add_scaling(Snapshot& snap, json& meta, const DataScaling& scaling) {
    const auto& m = scaling.observation_normalizer().moments();
    snap.arrays.push_back({"obs_mean", {m.mean().begin(), m.mean().end()}, {}});
    snap.arrays.push_back({"obs_p", {m.p().begin(), m.p().end()}, {}});
    const auto& r = scaling.reward_scaler();
    meta["obs_count"] = m.count();
    meta["reward_u"] = r.u();
    meta["reward_p"] = r.p();
    meta["reward_count"] = r.count();
}

void restore_scaling(DataScaling& scaling, const Snapshot& snap, const json& meta) {
    scaling.observation_normalizer().moments().restore(snap.array("obs_mean").values, snap.array("obs_p").values,
                                                       meta.at("obs_count").get<std::int64_t>());
    scaling.reward_scaler().restore(meta.at("reward_u").get<double>(), meta.at("reward_p").get<double>(),
                                    meta.at("reward_count").get<std::int64_t>());
}

}  // namespace

const SnapshotArray& Snapshot::array(const std::string& name) const {
    for (const auto& a : arrays) {
        if (a.name == name) return a;
    }
    throw std::runtime_error("netsnap: missing array '" + name + "'");
}

void write_snapshot(const Snapshot& snap, const std::filesystem::path& path) {
    json header;
    header["format"] = "netsnap";
    header["version"] = 1;
    header["meta"] = json::parse(snap.meta_json);
    header["arrays"] = json::array();
    std::uint64_t offset = 0;
    for (const auto& a : snap.arrays) {
        json entry = {{"name", a.name}, {"offset", offset}, {"count", a.values.size()}};
        if (!a.layers.empty()) entry["layers"] = layers_to_json(a.layers);
        header["arrays"].push_back(entry);
        offset += a.values.size();
    }
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("netsnap: cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& a : snap.arrays) {
        for (double v : a.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out) throw std::runtime_error("netsnap: write failed for " + path.string());
}

Snapshot read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("netsnap: cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("netsnap: bad magic in " + path.string());
    const std::uint64_t length = get_u64(in);
    if (length > (1u << 30)) throw std::runtime_error("netsnap: implausible header length");
    std::string text(length, '\0');
    in.read(text.data(), static_cast<std::streamsize>(length));
    if (!in) throw std::runtime_error("netsnap: truncated header");

    const json header = json::parse(text);
    if (header.value("format", "") != "netsnap") throw std::runtime_error("netsnap: not a netsnap header");
    Snapshot snap;
    snap.meta_json = header.at("meta").dump();
    std::uint64_t expected_offset = 0;
    for (const auto& entry : header.at("arrays")) {
        SnapshotArray a;
        a.name = entry.at("name").get<std::string>();
        if (entry.at("offset").get<std::uint64_t>() != expected_offset) {
            throw std::runtime_error("netsnap: arrays out of order");
        }
        const auto count = entry.at("count").get<std::uint64_t>();
        a.values.resize(count);
        for (auto& v : a.values) v = std::bit_cast<double>(get_u64(in));
        if (entry.contains("layers")) a.layers = layers_from_json(entry.at("layers"));
        expected_offset += count;
        snap.arrays.push_back(std::move(a));
    }
    return snap;
}

void save_network(const Network& net, const std::filesystem::path& path) {
    Snapshot snap;
    snap.arrays.push_back(network_array("network", net));
    write_snapshot(snap, path);
}

Network load_network(const std::filesystem::path& path) {
    const auto snap = read_snapshot(path);
    const auto& a = snap.array("network");
    Network net(a.layers);
    net.set_params(a.values);
    return net;
}

void save_checkpoint(const AnyAgent& any, const std::filesystem::path& path) {
    Snapshot snap;
    json meta;
    std::visit(
        [&](const auto& agent) {
            using A = std::decay_t<decltype(agent)>;
            if constexpr (std::is_same_v<A, StreamTdAgent>) {
                meta["agent"] = "stream_td";
                snap.arrays.push_back(network_array("value", agent.network()));
            } else if constexpr (std::is_same_v<A, StreamAcAgent>) {
                meta["agent"] = "stream_ac";
                snap.arrays.push_back(network_array("critic", agent.critic()));
                snap.arrays.push_back(network_array("actor", agent.actor()));
            } else {
                meta["agent"] = std::is_same_v<A, StreamQAgent> ? "stream_q" : "stream_sarsa";
                snap.arrays.push_back(network_array("action_value", agent.network()));
            }
            meta["steps"] = agent.steps();
            add_scaling(snap, meta, agent.scaling());
        },
        any);
    snap.meta_json = meta.dump();
    write_snapshot(snap, path);
}

void load_checkpoint(AnyAgent& any, const std::filesystem::path& path) {
    const auto snap = read_snapshot(path);
    const json meta = json::parse(snap.meta_json);
    std::visit(
        [&](auto& agent) {
            using A = std::decay_t<decltype(agent)>;
            std::string kind;
            if constexpr (std::is_same_v<A, StreamTdAgent>) {
                kind = "stream_td";
            } else if constexpr (std::is_same_v<A, StreamAcAgent>) {
                kind = "stream_ac";
            } else {
                kind = std::is_same_v<A, StreamQAgent> ? "stream_q" : "stream_sarsa";
            }
            if (meta.at("agent").get<std::string>() != kind) {
                throw std::runtime_error("netsnap: checkpoint holds a " + meta.at("agent").get<std::string>() +
                                         " agent, not " + kind);
            }
            if constexpr (std::is_same_v<A, StreamTdAgent>) {
                restore_network(agent.network(), snap, "value");
            } else if constexpr (std::is_same_v<A, StreamAcAgent>) {
                restore_network(agent.critic(), snap, "critic");
                restore_network(agent.actor(), snap, "actor");
            } else {
                restore_network(agent.network(), snap, "action_value");
            }
            restore_scaling(agent.scaling(), snap, meta);
            agent.set_steps(meta.at("steps").get<std::int64_t>());
        },
        any);
}

}  // namespace streamx
