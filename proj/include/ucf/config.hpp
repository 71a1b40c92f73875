#pragma once

// Key-value configuration: UTF-8 text, one `section.key = value` per line,
// full-line # comments. The parser is strict — unknown keys, duplicate keys,
// or malformed lines are errors — so a typo in a config file cannot silently
// fall back to a default.

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "ucf/common.hpp"

namespace ucf {

// every tunable constant the harness reads; one row per documented decision
inline const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "model.template_size", "model.search_size", "model.stride", "model.channels",
        "model.dim", "model.heads", "model.ffn_dim", "model.encoder_blocks",
        "model.decoder_blocks", "model.search_area_factor", "model.lambda_iou",
        "model.lambda_l1", "model.use_depth",
        "train.epochs", "train.lr_model", "train.lr_backbone", "train.weight_decay",
        "train.center_jitter", "train.scale_jitter", "train.seed",
        "train.split_fraction", "train.pair_gap", "train.pairs_per_sequence",
        "control.kp_linear", "control.ki_linear", "control.output_limit_linear",
        "control.integral_limit_linear", "control.kp_angular", "control.ki_angular",
        "control.output_limit_angular", "control.integral_limit_angular",
        "control.follow_distance", "control.reverse_speed_limit",
        "camera.width", "camera.height", "camera.hfov_deg", "camera.height_m",
        "noise.sigma_rgb", "noise.sigma_depth",
        "perception.noise_sigma", "perception.threshold", "perception.box_jitter",
        "perception.face_range",
        "metrics.iou_threshold", "metrics.grace_frames", "metrics.fps_floor",
        "protocol.trials", "protocol.seed", "protocol.timeout_seconds",
        "protocol.init_retry_frames",
        "record.frames",
    };
    return keys;
}

class Config {
public:
    Config() = default;
    explicit Config(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    double number(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::size_t used = 0;
        double out = 0.0;
        try {
            out = std::stod(it->second, &used);
        } catch (const std::exception&) {
            throw ContractError("config value for " + key + " is not a number: " + it->second);
        }
        if (used != it->second.size())
            throw ContractError("config value for " + key + " is not a number: " + it->second);
        return out;
    }

    long long integer(const std::string& key, long long fallback) const {
        const double v = number(key, static_cast<double>(fallback));
        const long long out = static_cast<long long>(v);
        if (static_cast<double>(out) != v)
            throw ContractError("config value for " + key + " is not an integer");
        return out;
    }

    bool flag(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw ContractError("config value for " + key + " is not a boolean: " + it->second);
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

namespace detail {

inline std::string strip(const std::string& s) {
    const auto from = s.find_first_not_of(" \t\r");
    if (from == std::string::npos) return "";
    const auto to = s.find_last_not_of(" \t\r");
    return s.substr(from, to - from + 1);
}

}  // namespace detail

inline Config parse_config(const std::string& text) {
    std::map<std::string, std::string> values;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = detail::strip(line);
        if (body.empty() || body[0] == '#') continue;
        const auto where = " (line " + std::to_string(line_no) + ")";
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ContractError("config line has no '='" + where);
        const std::string key = detail::strip(body.substr(0, eq));
        const std::string value = detail::strip(body.substr(eq + 1));
        if (key.empty()) throw ContractError("config line has an empty key" + where);
        if (value.empty()) throw ContractError("config key " + key + " has an empty value" + where);
        if (key.find('.') == std::string::npos)
            throw ContractError("config key " + key + " is missing its section" + where);
        if (known_config_keys().count(key) == 0)
            throw ContractError("unknown config key " + key + where);
        if (!values.emplace(key, value).second)
            throw ContractError("duplicate config key " + key + where);
    }
    return Config(std::move(values));
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("cannot read config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

// the experiment seed: config value, overridable by the UCF_SEED variable
inline std::uint64_t effective_seed(const Config& cfg) {
    if (const char* env = std::getenv("UCF_SEED")) {
        const std::string s(env);
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(s, &used);
            if (used == s.size()) return static_cast<std::uint64_t>(v);
        } catch (const std::exception&) {
        }
        throw ContractError("UCF_SEED is not an unsigned integer: " + s);
    }
    return static_cast<std::uint64_t>(cfg.integer("protocol.seed", 1));
}

}  // namespace ucf
