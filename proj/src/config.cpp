// SPDX-License-Identifier: Apache-2.0

#include "dropgan/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace dropgan {

using nlohmann::json;

std::vector<std::string> ExperimentConfig::violations() const {
    std::vector<std::string> out = ensemble.violations();
    for (auto& v : arch.violations()) out.push_back(std::move(v));
    try {
        data.validate();
    } catch (const ConfigError& e) {
        out.emplace_back(std::string("data: ") + e.what());
    }
    if (eval.every == 0) out.emplace_back("eval.every: must be >= 1");
    if (eval.samples < 2) out.emplace_back("eval.samples: must be >= 2");
    if (eval.wasserstein_samples == 0 || eval.wasserstein_samples > kExactWassersteinCap) {
        out.push_back("eval.wasserstein_samples: must be in [1, " +
                      std::to_string(kExactWassersteinCap) + "]");
    }
    if (eval.grid.bins == 0) out.emplace_back("eval.kl_bins: must be >= 1");
    if (!(eval.grid.upper > eval.grid.lower)) out.emplace_back("eval.kl_bound: must be > 0");
    if (!(eval.grid.smoothing > 0.0)) out.emplace_back("eval.kl_smoothing: must be > 0");
    if (!(eval.modes.capture_sigmas > 0.0)) out.emplace_back("eval.capture_sigmas: must be > 0");
    if (seeds.empty()) out.emplace_back("seeds: need at least one seed");
    return out;
}

void ExperimentConfig::validate() const {
    const auto v = violations();
    if (v.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& s : v) msg += "\n  " + s;
    throw ConfigError(msg);
}

namespace {

class Reader {
public:
    std::vector<std::string> errors;
    std::vector<std::string> warnings;

    /// Warns about keys of `obj` outside `known`.
    void known_keys(const json& obj, const std::string& path, std::set<std::string> known) {
        for (const auto& [key, _] : obj.items()) {
            if (!known.contains(key)) {
                warnings.push_back("unknown key '" + (path.empty() ? key : path + "." + key) +
                                   "' ignored");
            }
        }
    }

    const json* section(const json& obj, const std::string& key, const std::string& path) {
        auto it = obj.find(key);
        if (it == obj.end()) return nullptr;
        if (!it->is_object()) {
            errors.push_back(path + ": expected an object");
            return nullptr;
        }
        return &*it;
    }

    template <typename T>
    void read(const json& obj, const std::string& key, const std::string& path, T& target) {
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return;
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw std::invalid_argument("expected true/false");
            } else if constexpr (std::is_unsigned_v<T>) {
                if (!it->is_number_integer() || it->template get<long long>() < 0) {
                    throw std::invalid_argument("expected a non-negative integer");
                }
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!it->is_number()) throw std::invalid_argument("expected a number");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!it->is_string()) throw std::invalid_argument("expected a string");
            }
            target = it->template get<T>();
        } catch (const std::exception& e) {
            errors.push_back(path + "." + key + ": " + e.what());
        }
    }

    template <typename Fn>
    void read_enum(const json& obj, const std::string& key, const std::string& path, Fn&& apply) {
        std::string name;
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) return;
        read(obj, key, path, name);
        if (name.empty()) return;
        try {
            apply(name);
        } catch (const ConfigError& e) {
            errors.push_back(path + "." + key + ": " + e.what());
        }
    }

    void read_sizes(const json& obj, const std::string& key, const std::string& path,
                    std::vector<std::size_t>& target) {
        auto it = obj.find(key);
        if (it == obj.end()) return;
        if (!it->is_array()) {
            errors.push_back(path + "." + key + ": expected a list of sizes");
            return;
        }
        std::vector<std::size_t> sizes;
        for (const auto& v : *it) {
            if (!v.is_number_integer() || v.get<long long>() < 1) {
                errors.push_back(path + "." + key + ": sizes must be integers >= 1");
                return;
            }
            sizes.push_back(v.get<std::size_t>());
        }
        target = std::move(sizes);
    }
};

void read_mlp(Reader& r, const json& root, const std::string& key, std::vector<std::size_t>& hidden,
              Activation& activation) {
    const json* s = r.section(root, key, key);
    if (s == nullptr) return;
    r.known_keys(*s, key, {"hidden", "activation"});
    r.read_sizes(*s, "hidden", key, hidden);
    r.read_enum(*s, "activation", key, [&](const std::string& n) { activation = parse_activation(n); });
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");

    Reader r;
    ExperimentConfig c;
    r.known_keys(root, "", {"version", "ensemble", "data", "latent", "generator", "discriminator",
                            "init_scale", "eval", "checkpoint", "output", "seeds"});

    int version = kConfigVersion;
    r.read(root, "version", "config", version);
    if (version != kConfigVersion) {
        r.errors.push_back("config.version: unsupported version " + std::to_string(version));
    }

    if (const json* e = r.section(root, "ensemble", "ensemble")) {
        r.known_keys(*e, "ensemble",
                     {"discriminators", "dropout_rate", "batch_size", "split_batch", "objective",
                      "aggregation", "normalize_by_survivors", "steps_per_epoch", "epochs",
                      "parallel_discriminators", "adam"});
        auto& en = c.ensemble;
        r.read(*e, "discriminators", "ensemble", en.discriminators);
        r.read(*e, "dropout_rate", "ensemble", en.dropout_rate);
        r.read(*e, "batch_size", "ensemble", en.batch_size);
        r.read(*e, "split_batch", "ensemble", en.split_batch);
        r.read_enum(*e, "objective", "ensemble",
                    [&](const std::string& n) { en.objective = parse_objective(n); });
        r.read_enum(*e, "aggregation", "ensemble",
                    [&](const std::string& n) { en.aggregation.kind = parse_aggregation(n); });
        r.read(*e, "normalize_by_survivors", "ensemble", en.aggregation.normalize_by_survivors);
        r.read(*e, "steps_per_epoch", "ensemble", en.steps_per_epoch);
        r.read(*e, "epochs", "ensemble", en.epochs);
        r.read(*e, "parallel_discriminators", "ensemble", en.parallel_discriminators);
        if (const json* a = r.section(*e, "adam", "ensemble.adam")) {
            r.known_keys(*a, "ensemble.adam", {"lr", "beta1", "beta2", "eps"});
            r.read(*a, "lr", "ensemble.adam", en.adam.lr);
            r.read(*a, "beta1", "ensemble.adam", en.adam.beta1);
            r.read(*a, "beta2", "ensemble.adam", en.adam.beta2);
            r.read(*a, "eps", "ensemble.adam", en.adam.eps);
        }
    }

    if (const json* d = r.section(root, "data", "data")) {
        r.known_keys(*d, "data", {"modes", "radius", "sigma", "centers"});
        double sigma = c.data.sigma;
        r.read(*d, "sigma", "data", sigma);
        if (auto it = d->find("centers"); it != d->end()) {
            MixtureSpec spec;
            spec.sigma = sigma;
            bool ok = it->is_array();
            if (ok) {
                for (const auto& p : *it) {
                    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
                        ok = false;
                        break;
                    }
                    spec.centers.push_back({p[0].get<double>(), p[1].get<double>()});
                }
            }
            if (!ok) r.errors.emplace_back("data.centers: expected a list of [x, y] pairs");
            c.data = spec;
        } else {
            std::size_t modes = 8;
            double radius = 2.0;
            r.read(*d, "modes", "data", modes);
            r.read(*d, "radius", "data", radius);
            if (modes == 0) {
                r.errors.emplace_back("data.modes: must be >= 1");
            } else if (!(radius >= 0.0)) {
                r.errors.emplace_back("data.radius: must be >= 0");
            } else {
                c.data = ring_mixture_spec(modes, radius, sigma);
            }
        }
        c.data.sigma = sigma;
    }

    if (const json* l = r.section(root, "latent", "latent")) {
        r.known_keys(*l, "latent", {"dim"});
        r.read(*l, "dim", "latent", c.arch.latent.dim);
    }

    std::vector<std::size_t> g_hidden{128, 128};
    std::vector<std::size_t> d_hidden{128, 128};
    read_mlp(r, root, "generator", g_hidden, c.arch.generator.hidden);
    read_mlp(r, root, "discriminator", d_hidden, c.arch.discriminator.hidden);
    c.arch.generator.layer_sizes = {c.arch.latent.dim};
    c.arch.generator.layer_sizes.insert(c.arch.generator.layer_sizes.end(), g_hidden.begin(), g_hidden.end());
    c.arch.generator.layer_sizes.push_back(2);
    c.arch.discriminator.layer_sizes = {2};
    c.arch.discriminator.layer_sizes.insert(c.arch.discriminator.layer_sizes.end(), d_hidden.begin(), d_hidden.end());
    c.arch.discriminator.layer_sizes.push_back(1);
    r.read(root, "init_scale", "config", c.arch.init_scale);

    if (const json* e = r.section(root, "eval", "eval")) {
        r.known_keys(*e, "eval", {"every", "samples", "wasserstein_samples", "capture_sigmas",
                                  "absolute_radius", "min_count", "kl_bound", "kl_bins",
                                  "kl_smoothing"});
        r.read(*e, "every", "eval", c.eval.every);
        r.read(*e, "samples", "eval", c.eval.samples);
        r.read(*e, "wasserstein_samples", "eval", c.eval.wasserstein_samples);
        r.read(*e, "capture_sigmas", "eval", c.eval.modes.capture_sigmas);
        r.read(*e, "absolute_radius", "eval", c.eval.modes.absolute_radius);
        if (auto it = e->find("min_count"); it != e->end() && !it->is_null()) {
            std::size_t mc = 0;
            r.read(*e, "min_count", "eval", mc);
            c.eval.modes.min_count = mc;
        }
        double bound = c.eval.grid.upper;
        r.read(*e, "kl_bound", "eval", bound);
        c.eval.grid.lower = -bound;
        c.eval.grid.upper = bound;
        r.read(*e, "kl_bins", "eval", c.eval.grid.bins);
        r.read(*e, "kl_smoothing", "eval", c.eval.grid.smoothing);
    }

    if (const json* k = r.section(root, "checkpoint", "checkpoint")) {
        r.known_keys(*k, "checkpoint", {"keep_last"});
        r.read(*k, "keep_last", "checkpoint", c.keep_checkpoints);
    }

    if (const json* o = r.section(root, "output", "output")) {
        r.known_keys(*o, "output", {"directory"});
        std::string dir = c.output_dir.string();
        r.read(*o, "directory", "output", dir);
        c.output_dir = dir;
    }

    if (auto it = root.find("seeds"); it != root.end()) {
        if (!it->is_array()) {
            r.errors.emplace_back("seeds: expected a list of integers");
        } else {
            c.seeds.clear();
            for (const auto& s : *it) {
                if (!s.is_number_unsigned()) {
                    r.errors.emplace_back("seeds: entries must be non-negative integers");
                    break;
                }
                c.seeds.push_back(s.get<std::uint64_t>());
            }
        }
    }
    if (!c.seeds.empty()) c.ensemble.seed = c.seeds.front();

    for (auto& v : c.violations()) r.errors.push_back(std::move(v));
    if (!r.errors.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& s : r.errors) msg += "\n  " + s;
        throw ConfigError(msg);
    }
    return {std::move(c), std::move(r.warnings)};
}

ParsedConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string config_to_json(const ExperimentConfig& c) {
    const auto hidden = [](const MlpSpec& s) {
        return std::vector<std::size_t>(s.layer_sizes.begin() + 1, s.layer_sizes.end() - 1);
    };
    json centers = json::array();
    for (const auto& p : c.data.centers) centers.push_back({p[0], p[1]});
    const auto& en = c.ensemble;
    json j = {
        {"version", kConfigVersion},
        {"ensemble",
         {{"discriminators", en.discriminators},
          {"dropout_rate", en.dropout_rate},
          {"batch_size", en.batch_size},
          {"split_batch", en.split_batch},
          {"objective", std::string(objective_name(en.objective))},
          {"aggregation", std::string(aggregation_name(en.aggregation.kind))},
          {"normalize_by_survivors", en.aggregation.normalize_by_survivors},
          {"steps_per_epoch", en.steps_per_epoch},
          {"epochs", en.epochs},
          {"parallel_discriminators", en.parallel_discriminators},
          {"adam",
           {{"lr", en.adam.lr}, {"beta1", en.adam.beta1}, {"beta2", en.adam.beta2}, {"eps", en.adam.eps}}}}},
        {"data", {{"centers", centers}, {"sigma", c.data.sigma}}},
        {"latent", {{"dim", c.arch.latent.dim}}},
        {"generator",
         {{"hidden", hidden(c.arch.generator)},
          {"activation", std::string(activation_name(c.arch.generator.hidden))}}},
        {"discriminator",
         {{"hidden", hidden(c.arch.discriminator)},
          {"activation", std::string(activation_name(c.arch.discriminator.hidden))}}},
        {"init_scale", c.arch.init_scale},
        {"eval",
         {{"every", c.eval.every},
          {"samples", c.eval.samples},
          {"wasserstein_samples", c.eval.wasserstein_samples},
          {"capture_sigmas", c.eval.modes.capture_sigmas},
          {"absolute_radius", c.eval.modes.absolute_radius},
          {"min_count", c.eval.modes.min_count ? json(*c.eval.modes.min_count) : json(nullptr)},
          {"kl_bound", c.eval.grid.upper},
          {"kl_bins", c.eval.grid.bins},
          {"kl_smoothing", c.eval.grid.smoothing}}},
        {"checkpoint", {{"keep_last", c.keep_checkpoints}}},
        {"output", {{"directory", c.output_dir.string()}}},
        {"seeds", c.seeds},
    };
    return j.dump(2);
}

}  // namespace dropgan
