#pragma once

// Run configuration file: one `key = value` per line, `#` starts a comment. Unknown or
// repeated keys are rejected. format_config writes every key, so parse(format(c)) == c.

#include <charconv>
#include <functional>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bsgan/metrics.hpp"
#include "bsgan/training.hpp"

namespace bsgan {

struct RunConfig {
    TrainConfig train{};
    NpsConfig nps{};

    void validate() const {
        train.validate();
        nps.validate();
    }

    bool operator==(const RunConfig& o) const {
        return train == o.train && nps.roi_size == o.nps.roi_size && nps.n_roi == o.nps.n_roi && nps.seed == o.nps.seed;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
void parse_value(std::string_view text, T& out, const std::string& key) {
    auto bad = [&] { return ConfigError("config: invalid value '" + std::string(text) + "' for " + key); };
    if constexpr (std::is_same_v<T, bool>) {
        if (text == "true") out = true;
        else if (text == "false") out = false;
        else throw bad();
    } else if constexpr (std::is_same_v<T, GeneratorLoss>) {
        if (text == "non_saturating") out = GeneratorLoss::non_saturating;
        else if (text == "minimax") out = GeneratorLoss::minimax;
        else throw bad();
    } else {
        T v{};
        const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || end != text.data() + text.size()) throw bad();
        out = v;
    }
}

template <class T>
std::string format_value(const T& v) {
    if constexpr (std::is_same_v<T, bool>) {
        return v ? "true" : "false";
    } else if constexpr (std::is_same_v<T, GeneratorLoss>) {
        return v == GeneratorLoss::minimax ? "minimax" : "non_saturating";
    } else {
        char buf[64];
        // shortest representation that reads back to the same value
        const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, end);
    }
}

struct ConfigField {
    std::string key;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <class Access>
ConfigField make_field(std::string key, Access access) {
    return {key,
            [access, key](RunConfig& c, std::string_view text) { parse_value(text, access(c), key); },
            [access](const RunConfig& c) {
                RunConfig copy = c;
                return format_value(access(copy));
            }};
}

inline const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> fields = [] {
        std::vector<ConfigField> f;
#define BSGAN_FIELD(key, member) f.push_back(make_field(key, [](RunConfig& c) -> auto& { return c.member; }))
        BSGAN_FIELD("batch_size", train.batch_size);
        BSGAN_FIELD("lr", train.lr);
        BSGAN_FIELD("lambda_l1", train.lambda_l1);
        BSGAN_FIELD("steps", train.steps);
        BSGAN_FIELD("seed", train.seed);
        BSGAN_FIELD("history_buffer_on", train.history_buffer_on);
        BSGAN_FIELD("mbd_on", train.mbd_on);
        BSGAN_FIELD("haar_on", train.haar_on);
        BSGAN_FIELD("gan_on", train.gan_on);
        BSGAN_FIELD("l1_image_domain", train.l1_image_domain);
        BSGAN_FIELD("generator_loss", train.generator_loss);
        BSGAN_FIELD("eval_every", train.eval_every);
        BSGAN_FIELD("generator.input_size", train.generator.input_size);
        BSGAN_FIELD("generator.base_channels", train.generator.base_channels);
        BSGAN_FIELD("generator.n_res_blocks", train.generator.n_res_blocks);
        BSGAN_FIELD("generator.se_reduction", train.generator.se_reduction);
        BSGAN_FIELD("generator.depth", train.generator.depth);
        BSGAN_FIELD("generator.noise_std", train.generator.noise_std);
        BSGAN_FIELD("discriminator.n_conv", train.discriminator.n_conv);
        BSGAN_FIELD("discriminator.base_channels", train.discriminator.base_channels);
        BSGAN_FIELD("discriminator.mbd_kernels", train.discriminator.mbd_kernels);
        BSGAN_FIELD("discriminator.mbd_dim", train.discriminator.mbd_dim);
        BSGAN_FIELD("discriminator.condition_on_source", train.discriminator.condition_on_source);
        BSGAN_FIELD("nps.roi_size", nps.roi_size);
        BSGAN_FIELD("nps.n_roi", nps.n_roi);
        BSGAN_FIELD("nps.seed", nps.seed);
#undef BSGAN_FIELD
        return f;
    }();
    return fields;
}

}  // namespace detail

/// Keys not present keep their defaults. The result is validated.
inline RunConfig parse_config(std::string_view text) {
    RunConfig cfg;
    std::map<std::string, std::size_t> seen;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = "config line " + std::to_string(line_no);
        if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        const auto& fields = detail::config_fields();
        const auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return f.key == key; });
        if (it == fields.end()) throw ConfigError(where + ": unknown key '" + key + "'");
        if (auto [pos, fresh] = seen.emplace(key, line_no); !fresh)
            throw ConfigError(where + ": key '" + key + "' already set on line " + std::to_string(pos->second));
        it->set(cfg, value);
    }
    cfg.validate();
    return cfg;
}

inline std::string format_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& f : detail::config_fields()) out += f.key + " = " + f.get(cfg) + "\n";
    return out;
}

inline RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace bsgan
