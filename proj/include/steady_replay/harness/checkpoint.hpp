#pragma once

// SRCKPT checkpoint format:
//
//   SRCKPT 1\n
//   net <name> <dim0> <dim1> ...\n
//   <parameter count>\n
//   <count x little-endian IEEE-754 binary64, layer order, weights row-major then biases>
//   ... repeated for actor, critic, target_actor, target_critic
//
// Optimizer moments are not stored; a loaded agent starts with fresh Adam state.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "steady_replay/ddpg.hpp"
#include "steady_replay/errors.hpp"
#include "steady_replay/net.hpp"

namespace steady_replay {

inline constexpr const char* kCheckpointMagic = "SRCKPT 1";

namespace checkpoint_detail {

inline void put_f64_le(std::string& out, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline double get_f64_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

inline void write_net(std::string& out, const std::string& name, const Mlp& net) {
    out += "net " + name;
    for (auto d : net.layer_dims) out += " " + std::to_string(d);
    out += "\n" + std::to_string(net.parameter_count()) + "\n";
    for (double p : flatten(net)) put_f64_le(out, p);
}

inline std::string read_line(std::istream& in, const char* what) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError(std::string("checkpoint truncated before ") + what);
    return line;
}

inline Mlp read_net(std::istream& in, const std::string& expected_name, OutputActivation act) {
    std::istringstream header(read_line(in, "network header"));
    std::string tag;
    std::string name;
    header >> tag >> name;
    if (tag != "net" || name != expected_name)
        throw FormatError("checkpoint: expected network '" + expected_name + "', found '" + tag + " " + name + "'");
    std::vector<std::size_t> dims;
    std::string tok;
    while (header >> tok) {
        std::size_t d = 0;
        try {
            std::size_t used = 0;
            d = std::stoull(tok, &used);
            if (used != tok.size()) throw FormatError("");
        } catch (...) {
            throw FormatError("checkpoint: bad layer dimension '" + tok + "'");
        }
        dims.push_back(d);
    }
    try {
        validate_dims(dims);
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    Mlp net = init_mlp(dims, act, 0);
    const std::string count_line = read_line(in, "parameter count");
    std::size_t count = 0;
    try {
        std::size_t used = 0;
        count = std::stoull(count_line, &used);
        if (used != count_line.size()) throw FormatError("");
    } catch (...) {
        throw FormatError("checkpoint: bad parameter count '" + count_line + "'");
    }
    if (count != net.parameter_count())
        throw FormatError("checkpoint: parameter count " + std::to_string(count) + " does not match layer dims");
    std::vector<unsigned char> bytes(count * 8);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw FormatError("checkpoint: truncated parameter block");
    std::vector<double> params(count);
    for (std::size_t i = 0; i < count; ++i) params[i] = get_f64_le(bytes.data() + 8 * i);
    unflatten(net, params);
    return net;
}

}  // namespace checkpoint_detail

inline std::string serialize_checkpoint(const Agent& agent) {
    std::string out = std::string(kCheckpointMagic) + "\n";
    checkpoint_detail::write_net(out, "actor", agent.actor);
    checkpoint_detail::write_net(out, "critic", agent.critic);
    checkpoint_detail::write_net(out, "target_actor", agent.target_actor);
    checkpoint_detail::write_net(out, "target_critic", agent.target_critic);
    return out;
}

inline void save_checkpoint(const Agent& agent, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint '" + path + "'");
    const std::string bytes = serialize_checkpoint(agent);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed writing checkpoint '" + path + "'");
}

/// The returned agent carries `cfg` with hidden sizes taken from the file.
inline Agent deserialize_checkpoint(std::istream& in, AgentConfig cfg = {}) {
    std::string magic;
    if (!std::getline(in, magic) || magic != kCheckpointMagic) throw FormatError("checkpoint: bad magic/version line");
    Agent a;
    a.actor = checkpoint_detail::read_net(in, "actor", OutputActivation::tanh);
    a.critic = checkpoint_detail::read_net(in, "critic", OutputActivation::identity);
    a.target_actor = checkpoint_detail::read_net(in, "target_actor", OutputActivation::tanh);
    a.target_critic = checkpoint_detail::read_net(in, "target_critic", OutputActivation::identity);
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint: trailing bytes");
    if (!a.target_actor.same_architecture(a.actor) || !a.target_critic.same_architecture(a.critic))
        throw FormatError("checkpoint: target network architecture differs from its source");
    const auto& ad = a.actor.layer_dims;
    const auto& cd = a.critic.layer_dims;
    if (ad.front() != kObsDim || ad.back() != kActDim || cd.front() != kCriticInputDim || cd.back() != 1)
        throw FormatError("checkpoint: network input/output sizes do not match the 20-D observation / 3-D action task");
    cfg.hidden.assign(ad.begin() + 1, ad.end() - 1);
    a.cfg = cfg;
    a.actor_opt = AdamState::for_net(a.actor, cfg.lr_actor);
    a.critic_opt = AdamState::for_net(a.critic, cfg.lr_critic);
    return a;
}

inline Agent load_checkpoint(const std::string& path, AgentConfig cfg = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint '" + path + "'");
    return deserialize_checkpoint(in, std::move(cfg));
}

}  // namespace steady_replay
