#include "lsg/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "lsg/diffusion.hpp"
#include "lsg/field.hpp"
#include "lsg/geodesic.hpp"
#include "lsg/io.hpp"
#include "lsg/levelset.hpp"
#include "lsg/metrics.hpp"
#include "lsg/par.hpp"
#include "lsg/phantom.hpp"
#include "lsg/rng.hpp"
#include "lsg/topo.hpp"

namespace lsg::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(std::string_view text) {
    return fnv1a64(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

namespace {

class ConfigError : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

json defaults() {
    return json::parse(R"({
  "schema_version": 1,
  "seed": 0,
  "inputs": {"image": null, "mask": null, "gt": null, "pred": null, "distance": null,
             "edge_term": null, "eps_true": null, "eps_hat": null, "modes": []},
  "phantom": {"kind": "two-disks", "size": 64, "foreground": 0.8, "background": 0.2,
              "noise_sigma": 0.0, "foreground_noise_sigma": null},
  "levelset": {"epsilon": 1.5, "lambda_region": 0.01, "lambda_length": 0.01,
               "lambda_area": 0.0001, "lambda_distance": 0.001, "var_floor": 1e-6,
               "mapping": "offset", "area_a1": null, "area_a2": null},
  "evolve": {"dt": 0.1, "steps": 500, "stats_refresh": 1, "init_box": null},
  "speed": {"eps_d": 0.001, "beta_g": 1000.0, "nu": 0.0},
  "eikonal": {"tolerance": 1e-6, "max_passes": 1000, "init_radius": 8.0},
  "td": {"model": "cv", "radius": 2.0, "samples": 200, "epsilon": 0.001, "tie_fraction": 0.001},
  "par": {"tau": 10, "sigma_floor": 0.0001, "feature": "intensity", "position_weight": 0.0},
  "diffusion": {"steps": 1000, "beta1": 0.0001, "beta_t": 0.02},
  "guidance": {"gamma0": 1.0, "schedule": "noise-scaled", "distance_refresh": 50,
               "formulation": "noise"},
  "provider": {"kind": "mixture", "builtin": "disk-ring", "size": 32, "weights": null,
               "base_sigma": 0.1},
  "sample": {"ensemble": 20},
  "losses": {"eta1": 0.5, "eta2": 0.005, "w_t": 1.0},
  "metrics": {"threshold": 0.5}
})");
}

bool same_kind(const json& a, const json& b) {
    if (a.is_number() && b.is_number()) return true;
    return a.type() == b.type();
}

void merge_checked(json& base, const json& user, const std::string& prefix) {
    if (!user.is_object()) {
        throw ConfigError("config '" + (prefix.empty() ? std::string("<root>") : prefix) +
                          "' must be an object");
    }
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!base.contains(it.key())) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        json& slot = base[it.key()];
        if (slot.is_object()) {
            merge_checked(slot, it.value(), key);
        } else if (slot.is_null() || it.value().is_null() || same_kind(slot, it.value())) {
            slot = it.value();
        } else {
            throw ConfigError("config key '" + key + "' has the wrong type (expected " +
                              std::string(slot.type_name()) + ")");
        }
    }
}

json load_config_file(const fs::path& path) {
    if (!fs::exists(path)) {
        throw ConfigError("config file '" + path.string() + "' does not exist");
    }
    const auto bytes = read_bytes(path);
    json doc;
    try {
        doc = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path.string() + "': " + e.what());
    }
    // A run manifest carries its resolved config; accept it for replays.
    if (doc.is_object() && doc.contains("manifest_version") && doc.contains("config")) {
        return doc["config"];
    }
    return doc;
}

json& at_path(json& cfg, const std::string& dotted) {
    json* node = &cfg;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (!node->is_object() || !node->contains(part)) {
            throw ConfigError("unknown config key '" + dotted + "'");
        }
        node = &(*node)[part];
    }
    return *node;
}

const json& at_path(const json& cfg, const std::string& dotted) {
    return at_path(const_cast<json&>(cfg), dotted);
}

void apply_override(json& cfg, const std::string& dotted, const std::string& text) {
    json& slot = at_path(cfg, dotted);
    json value;
    const bool textual = slot.is_string() || dotted.rfind("inputs.", 0) == 0;
    if (textual && !slot.is_array()) {
        value = text;
    } else {
        try {
            value = json::parse(text);
        } catch (const json::parse_error&) {
            value = text;
        }
    }
    json patch = json::object();
    json* node = &patch;
    std::stringstream ss(dotted);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        node = &(*node)[parts[i]];
    }
    (*node)[parts.back()] = value;
    merge_checked(cfg, patch, "");
}

double num(const json& cfg, const std::string& key) {
    const json& v = at_path(cfg, key);
    if (!v.is_number()) {
        throw ConfigError("config key '" + key + "' must be a number");
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
        throw ConfigError("config key '" + key + "' must be finite");
    }
    return d;
}

std::optional<double> opt_num(const json& cfg, const std::string& key) {
    if (at_path(cfg, key).is_null()) return std::nullopt;
    return num(cfg, key);
}

std::size_t count(const json& cfg, const std::string& key) {
    const json& v = at_path(cfg, key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError("config key '" + key + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

std::string str(const json& cfg, const std::string& key) {
    const json& v = at_path(cfg, key);
    if (!v.is_string()) {
        throw ConfigError("config key '" + key + "' must be a string");
    }
    return v.get<std::string>();
}

std::uint64_t seed_of(const json& cfg) {
    const json& v = at_path(cfg, "seed");
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError("config key 'seed' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

// Re-raises domain-level argument errors as config errors naming the key.
template <class Fn>
auto parsed(const std::string& key, Fn&& fn) {
    try {
        return fn();
    } catch (const InvalidInput& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

json to_json(const EnergyReport& e) {
    return {{"region", e.region},
            {"length", e.length},
            {"area", e.area},
            {"distance", e.distance},
            {"total", e.total}};
}

json to_json(const EnergyWeights& w) {
    return {{"region", w.region}, {"length", w.length}, {"area", w.area}, {"distance", w.distance}};
}

json to_json(const RegionStats& s) {
    return {{"mean_in", s.mean_in}, {"var_in", s.var_in}, {"mass_in", s.mass_in},
            {"mean_out", s.mean_out}, {"var_out", s.var_out}, {"mass_out", s.mass_out}};
}

json to_json(const Confusion& c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

json to_json(const Scores& s) {
    return {{"dice", s.dice}, {"jaccard", s.jaccard}, {"precision", s.precision},
            {"recall", s.recall}};
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trace_csv(const std::vector<EnergyReport>& trace, std::size_t first_step,
                      bool descending) {
    std::string out = "step,e_region,e_length,e_area,e_distance,e_total\n";
    for (std::size_t k = 0; k < trace.size(); ++k) {
        const std::size_t step = descending ? first_step - k : first_step + k;
        const EnergyReport& e = trace[k];
        out += std::to_string(step) + "," + fmt(e.region) + "," + fmt(e.length) + "," +
               fmt(e.area) + "," + fmt(e.distance) + "," + fmt(e.total) + "\n";
    }
    return out;
}

struct Context {
    std::string command;
    json cfg;
    fs::path out;
    std::vector<std::string> artifacts;
    std::ostream& log;

    void write(const std::string& rel, std::span<const std::uint8_t> bytes) {
        const fs::path p = out / rel;
        fs::create_directories(p.parent_path());
        write_bytes(p, bytes);
        artifacts.push_back(rel);
    }
    void write_text(const std::string& rel, const std::string& text) {
        write(rel, std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }
    void write_json(const std::string& name, const json& j) {
        write_text("reports/" + name + ".json", j.dump(2) + "\n");
    }
    void write_field(const std::string& name, const ScalarField& f, bool preview) {
        write("fields/" + name + ".lsf", encode_lsf1(f));
        if (preview) {
            double lo = f.min();
            double hi = f.max();
            if (lo >= 0.0 && hi <= 1.0) {
                lo = 0.0;
                hi = 1.0;
            } else if (!(hi > lo)) {
                hi = lo + 1.0;
            }
            write("fields/" + name + ".pgm", encode_pgm(f, lo, hi));
        }
    }

    std::optional<ScalarField> input(const std::string& key) const {
        const json& v = at_path(cfg, "inputs." + key);
        if (v.is_null()) {
            return std::nullopt;
        }
        if (!v.is_string()) {
            throw ConfigError("config key 'inputs." + key + "' must be a path string");
        }
        const fs::path p = v.get<std::string>();
        if (!fs::exists(p)) {
            throw ConfigError("inputs." + key + ": file '" + p.string() + "' does not exist");
        }
        return load_field(p);
    }
    ScalarField required(const std::string& key) const {
        auto f = input(key);
        if (!f) {
            throw ConfigError("subcommand '" + command + "' needs inputs." + key);
        }
        return *f;
    }
};

PhantomSpec phantom_spec(const json& cfg) {
    PhantomSpec ps;
    ps.kind = parsed("phantom.kind", [&] { return parse_phantom_kind(str(cfg, "phantom.kind")); });
    ps.size = count(cfg, "phantom.size");
    ps.foreground = num(cfg, "phantom.foreground");
    ps.background = num(cfg, "phantom.background");
    ps.noise_sigma = num(cfg, "phantom.noise_sigma");
    ps.foreground_noise_sigma = opt_num(cfg, "phantom.foreground_noise_sigma");
    ps.seed = seed_of(cfg);
    return ps;
}

// Image and truth mask from inputs, or the configured phantom when no
// image is given.
struct Scene {
    ScalarField image;
    std::optional<ScalarField> truth;
    std::string source;
};

Scene scene(const Context& ctx) {
    if (auto img = ctx.input("image")) {
        return {*img, ctx.input("gt"), "inputs"};
    }
    const Phantom ph = make_phantom(phantom_spec(ctx.cfg));
    return {ph.image, ph.mask, "phantom"};
}

LevelSetConfig levelset_config(const json& cfg) {
    LevelSetConfig c;
    c.heaviside.epsilon = num(cfg, "levelset.epsilon");
    if (!(c.heaviside.epsilon > 0.0)) {
        throw ConfigError("config key 'levelset.epsilon' must be > 0");
    }
    c.weights.region = num(cfg, "levelset.lambda_region");
    c.weights.length = num(cfg, "levelset.lambda_length");
    c.weights.area = num(cfg, "levelset.lambda_area");
    c.weights.distance = num(cfg, "levelset.lambda_distance");
    c.var_floor = num(cfg, "levelset.var_floor");
    const std::string m = str(cfg, "levelset.mapping");
    if (m == "offset") {
        c.mapping = PhiMapping::Offset;
    } else if (m == "literal") {
        c.mapping = PhiMapping::Literal;
    } else {
        throw ConfigError("config key 'levelset.mapping' must be 'offset' or 'literal'");
    }
    return c;
}

AreaPrior area_prior(const json& cfg, const LevelSetConfig& lc, const ScalarField& init_mask) {
    const auto a1 = opt_num(cfg, "levelset.area_a1");
    const auto a2 = opt_num(cfg, "levelset.area_a2");
    if (a1.has_value() != a2.has_value()) {
        throw ConfigError("levelset.area_a1 and levelset.area_a2 must be given together");
    }
    if (a1) {
        return parsed("levelset.area_a1", [&] { return AreaPrior::explicit_targets(*a1, *a2, init_mask.size()); });
    }
    const double mass = heaviside(phi_from_mask(init_mask, lc.mapping), lc.heaviside).sum();
    return AreaPrior::from_inside_mass(mass, init_mask.size());
}

SpeedParams speed_params(const json& cfg) {
    return {num(cfg, "speed.eps_d"), num(cfg, "speed.beta_g"), num(cfg, "speed.nu")};
}

EikonalOptions eikonal_options(const json& cfg) {
    return {num(cfg, "eikonal.tolerance"), count(cfg, "eikonal.max_passes"),
            num(cfg, "eikonal.init_radius")};
}

ParParams par_params(const json& cfg) {
    ParParams pp;
    pp.tau = count(cfg, "par.tau");
    pp.sigma_floor = num(cfg, "par.sigma_floor");
    const std::string f = str(cfg, "par.feature");
    if (f == "intensity") {
        pp.feature = ParFeature::Intensity;
    } else if (f == "intensity-position") {
        pp.feature = ParFeature::IntensityPosition;
    } else {
        throw ConfigError("config key 'par.feature' must be 'intensity' or 'intensity-position'");
    }
    pp.position_weight = num(cfg, "par.position_weight");
    return pp;
}

ScalarField hard_mask(const ScalarField& f) {
    ScalarField out(f.width(), f.height());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i] >= 0.5 ? 1.0 : 0.0;
    return out;
}

json dice_json(const ScalarField& pred, const std::optional<ScalarField>& truth) {
    if (!truth) return nullptr;
    return scores(confusion(pred, *truth)).dice;
}

// ---- subcommands ----------------------------------------------------------

void cmd_phantom(Context& ctx) {
    const PhantomSpec ps = phantom_spec(ctx.cfg);
    const Phantom ph = make_phantom(ps);
    ctx.write_field("image", ph.image, true);
    ctx.write_field("mask", ph.mask, true);
    ctx.write_json("phantom", {{"kind", to_string(ps.kind)},
                               {"size", ps.size},
                               {"foreground_pixels", ph.mask.sum()},
                               {"components", count_components(ph.mask, 0.5)},
                               {"euler_characteristic", euler_characteristic(ph.mask, 0.5)}});
}

void cmd_energy(Context& ctx) {
    const Scene sc = scene(ctx);
    const ScalarField mask = sc.source == "inputs" ? ctx.required("mask") : *sc.truth;
    require_same_shape(sc.image, mask, "energy inputs");
    const LevelSetConfig lc = levelset_config(ctx.cfg);
    const AreaPrior prior = area_prior(ctx.cfg, lc, mask);
    ScalarField dist(mask.width(), mask.height());
    std::string dist_source = "geodesic";
    if (auto d = ctx.input("distance")) {
        dist = *d;
        dist_source = "inputs";
    } else {
        int status = 0;
        dist = guidance_distance(speed_field(sc.image, speed_params(ctx.cfg), ctx.input("edge_term")),
                                 mask, eikonal_options(ctx.cfg), &status);
        if (status != 0) dist_source = status == 1 ? "zero (empty seed)" : "zero (full seed)";
    }
    const ScalarField phi = phi_from_mask(mask, lc.mapping);
    const EnergyReport e = energy_total(sc.image, phi, lc, prior, dist);
    json report = {{"source", sc.source},
                   {"energy", to_json(e)},
                   {"weights", to_json(lc.weights)},
                   {"epsilon", lc.heaviside.epsilon},
                   {"area_prior", {{"a1", prior.a1}, {"a2", prior.a2}, {"overridden", prior.overridden}}},
                   {"distance_source", dist_source}};
    if (lc.weights.region != 0.0) {
        report["stats"] = to_json(region_stats(sc.image, phi, lc.heaviside, lc.var_floor));
    }
    ctx.write_json("energy", report);
}

void cmd_evolve(Context& ctx) {
    const Scene sc = scene(ctx);
    const std::size_t w = sc.image.width();
    const std::size_t h = sc.image.height();
    ScalarField init(w, h);
    if (auto m = ctx.input("mask")) {
        init = *m;
    } else if (const json& box = at_path(ctx.cfg, "evolve.init_box"); !box.is_null()) {
        if (!box.is_array() || box.size() != 4) {
            throw ConfigError("config key 'evolve.init_box' must be [x0, y0, x1, y1]");
        }
        const auto b = box.get<std::vector<std::size_t>>();
        init = box_mask(w, h, b[0], b[1], b[2], b[3]);
    } else {
        init = box_mask(w, h, w / 8, h / 4, w - w / 8, 3 * h / 4);
    }
    const LevelSetConfig lc = levelset_config(ctx.cfg);
    const AreaPrior prior = area_prior(ctx.cfg, lc, init);
    ScalarField dist(w, h);
    if (auto d = ctx.input("distance")) dist = *d;
    EvolveParams ep;
    ep.dt = num(ctx.cfg, "evolve.dt");
    ep.steps = count(ctx.cfg, "evolve.steps");
    ep.stats_refresh = count(ctx.cfg, "evolve.stats_refresh");
    const EvolveResult r = evolve(sc.image, phi_from_mask(init, lc.mapping), lc, prior, dist, ep);
    const ScalarField soft = heaviside(r.phi, lc.heaviside);
    const ScalarField mask = hard_mask(soft);
    ctx.write_field("phi", r.phi, false);
    ctx.write_field("mask", mask, true);
    ctx.write_text("traces/energy.csv", trace_csv(r.trace, 1, false));
    ctx.write_json("evolve", {{"source", sc.source},
                              {"steps", ep.steps},
                              {"final_energy", to_json(r.trace.back())},
                              {"components", count_components(mask, 0.5)},
                              {"dice", dice_json(mask, sc.truth)}});
}

void cmd_td_verify(Context& ctx) {
    const Scene sc = scene(ctx);
    const ScalarField mask = sc.source == "inputs" ? ctx.required("mask") : *sc.truth;
    TdVerifyOptions o;
    o.model = parsed("td.model", [&] { return parse_td_model(str(ctx.cfg, "td.model")); });
    o.radius = num(ctx.cfg, "td.radius");
    o.samples = count(ctx.cfg, "td.samples");
    o.seed = seed_of(ctx.cfg);
    o.heaviside.epsilon = num(ctx.cfg, "td.epsilon");
    o.var_floor = num(ctx.cfg, "levelset.var_floor");
    o.tie_fraction = num(ctx.cfg, "td.tie_fraction");
    const TdVerifyReport r = verify_td(sc.image, mask, o);
    const TdField td = td_field(sc.image, hard_mask(mask), o.model, o.heaviside, o.var_floor);
    ctx.write_field("td", td.values, true);
    ctx.write_json("td_verify", {{"source", sc.source},
                                 {"model", to_string(o.model)},
                                 {"radius", o.radius},
                                 {"requested", r.requested},
                                 {"evaluated", r.evaluated},
                                 {"excluded_ties", r.excluded_ties},
                                 {"all_excluded", r.evaluated == 0},
                                 {"tie_threshold", r.tie_threshold},
                                 {"sign_agreement", opt_json(r.sign_agreement)},
                                 {"median_rel_err", opt_json(r.median_rel_err)},
                                 {"max_rel_err", opt_json(r.max_rel_err)}});
}

void cmd_geodesic(Context& ctx) {
    const Scene sc = scene(ctx);
    const ScalarField seed = sc.source == "inputs" ? ctx.required("mask") : *sc.truth;
    const ScalarField speed = speed_field(sc.image, speed_params(ctx.cfg), ctx.input("edge_term"));
    const DistanceMap d = solve_eikonal(speed, seed, eikonal_options(ctx.cfg));
    ctx.write_field("speed", speed, false);
    ctx.write_field("distance", d.values, true);
    ctx.write_json("geodesic", {{"source", sc.source},
                                {"seed_pixels", d.seed.sum()},
                                {"raw_max", d.raw_max},
                                {"all_zero", d.all_zero}});
}

void cmd_par(Context& ctx) {
    const ScalarField image = ctx.required("image");
    const ScalarField mask = ctx.required("mask");
    require_same_shape(image, mask, "par inputs");
    const ParParams pp = par_params(ctx.cfg);
    const ScalarField refined = refine(mask, affinity_kernel(image, pp), pp.tau);
    const ParLoss loss = par_loss(mask, refined);
    const auto gt = ctx.input("gt");
    ctx.write_field("refined", refined, true);
    ctx.write_json("par", {{"tau", pp.tau},
                           {"l_par", loss.sum},
                           {"l_par_mean", loss.mean},
                           {"dice_before", dice_json(mask, gt)},
                           {"dice_after", dice_json(refined, gt)}});
}

struct SampleSetup {
    LsfSetup lsf;
    std::unique_ptr<ScoreProvider> provider;
    std::vector<ScalarField> modes;
    std::vector<std::string> mode_names;
};

SampleSetup sample_setup(const Context& ctx) {
    const json& cfg = ctx.cfg;
    SampleSetup s;
    s.lsf.config = levelset_config(cfg);
    const auto image = ctx.input("image");
    const json& mode_paths = at_path(cfg, "inputs.modes");
    if (!mode_paths.is_array()) {
        throw ConfigError("config key 'inputs.modes' must be an array of paths");
    }
    if (!mode_paths.empty()) {
        for (const json& p : mode_paths) {
            if (!p.is_string() || !fs::exists(p.get<std::string>())) {
                throw ConfigError("inputs.modes: every entry must name an existing file");
            }
            s.modes.push_back(load_field(p.get<std::string>()));
            s.mode_names.push_back(fs::path(p.get<std::string>()).stem().string());
        }
        if (!image) {
            throw ConfigError("inputs.modes needs inputs.image");
        }
        s.lsf.image = *image;
    } else {
        if (str(cfg, "provider.builtin") != "disk-ring") {
            throw ConfigError("config key 'provider.builtin' must be 'disk-ring'");
        }
        const std::size_t n = image ? image->width() : count(cfg, "provider.size");
        const std::size_t m = image ? image->height() : n;
        const double cx = (static_cast<double>(n) - 1.0) / 2.0;
        const double cy = (static_cast<double>(m) - 1.0) / 2.0;
        const double r = 0.35 * static_cast<double>(std::min(n, m));
        const ScalarField disk = disk_mask(n, m, cx, cy, r);
        const ScalarField hole = disk_mask(n, m, cx, cy, 0.15 * static_cast<double>(std::min(n, m)));
        ScalarField ring = disk;
        for (std::size_t i = 0; i < ring.size(); ++i) ring[i] -= hole[i];
        s.modes = {disk, ring};
        s.mode_names = {"disk", "ring"};
        if (image) {
            s.lsf.image = *image;
        } else {
            s.lsf.image = ScalarField(n, m);
            for (std::size_t i = 0; i < disk.size(); ++i) s.lsf.image[i] = 0.2 + 0.6 * disk[i];
        }
    }
    for (const auto& mode : s.modes) require_same_shape(s.lsf.image, mode, "sample modes");

    const std::string kind = str(cfg, "provider.kind");
    std::vector<double> weights(s.modes.size(), 1.0 / static_cast<double>(s.modes.size()));
    if (const json& w = at_path(cfg, "provider.weights"); !w.is_null()) {
        if (!w.is_array() || w.size() != s.modes.size()) {
            throw ConfigError("config key 'provider.weights' needs one weight per mode");
        }
        weights = w.get<std::vector<double>>();
    }
    auto mixture = parsed("provider.weights", [&] {
        return std::make_unique<MixtureProvider>(s.modes, weights, num(cfg, "provider.base_sigma"));
    });
    s.lsf.prior = area_prior(cfg, s.lsf.config, s.modes[0]);
    if (at_path(cfg, "levelset.area_a1").is_null()) {
        s.lsf.prior = mixture_area_prior(*mixture, s.lsf.config);
    }
    if (kind == "mixture") {
        s.provider = std::move(mixture);
    } else if (kind == "frozen") {
        s.provider = std::make_unique<FrozenProvider>(ctx.required("eps_hat"));
    } else {
        throw ConfigError("config key 'provider.kind' must be 'mixture' or 'frozen'");
    }
    return s;
}

void cmd_sample(Context& ctx) {
    const json& cfg = ctx.cfg;
    SampleSetup setup = sample_setup(ctx);
    const DiffusionSchedule sched = parsed("diffusion", [&] {
        return make_schedule(count(cfg, "diffusion.steps"), num(cfg, "diffusion.beta1"),
                             num(cfg, "diffusion.beta_t"));
    });
    SampleParams sp;
    sp.guidance.gamma0 = num(cfg, "guidance.gamma0");
    if (!(sp.guidance.gamma0 >= 0.0)) {
        throw ConfigError("config key 'guidance.gamma0' must be >= 0");
    }
    sp.guidance.schedule = parsed("guidance.schedule", [&] {
        return parse_guidance_schedule(str(cfg, "guidance.schedule"));
    });
    sp.distance_refresh = count(cfg, "guidance.distance_refresh");
    const std::string form = str(cfg, "guidance.formulation");
    if (form != "noise" && form != "score") {
        throw ConfigError("config key 'guidance.formulation' must be 'noise' or 'score'");
    }
    sp.formulation = form == "noise" ? Formulation::Noise : Formulation::Score;
    sp.seed = seed_of(cfg);
    sp.ensemble = count(cfg, "sample.ensemble");
    sp.speed = speed_params(cfg);
    sp.eikonal = eikonal_options(cfg);
    if (sp.ensemble < 1 || sp.distance_refresh < 1) {
        throw ConfigError("sample.ensemble and guidance.distance_refresh must be >= 1");
    }
    const SampleResult r = sample(setup.lsf, *setup.provider, sched, sp);

    json nearest = json::object();
    for (const auto& name : setup.mode_names) nearest[name] = 0;
    json member_energy = json::array();
    for (const ScalarField& m : r.members) {
        std::size_t best = 0;
        double best_d = 0.0;
        for (std::size_t k = 0; k < setup.modes.size(); ++k) {
            double d = 0.0;
            for (std::size_t i = 0; i < m.size(); ++i) {
                d += (m[i] - setup.modes[k][i]) * (m[i] - setup.modes[k][i]);
            }
            if (k == 0 || d < best_d) {
                best = k;
                best_d = d;
            }
        }
        nearest[setup.mode_names[best]] = nearest[setup.mode_names[best]].get<int>() + 1;
        member_energy.push_back(lsf_energy(setup.lsf, m, sp.speed, sp.eikonal).total);
    }
    ctx.write_field("mask", r.mask, true);
    ctx.write_text("traces/sample.csv", trace_csv(r.trace, sched.steps, true));
    ctx.write_json("sample",
                   {{"ensemble", sp.ensemble},
                    {"gamma0", sp.guidance.gamma0},
                    {"guidance_schedule", to_string(sp.guidance.schedule)},
                    {"formulation", form},
                    {"final_energy", to_json(lsf_energy(setup.lsf, r.mask, sp.speed, sp.eikonal))},
                    {"member_final_lsf", member_energy},
                    {"nearest_mode_counts", nearest},
                    {"warnings",
                     {{"degenerate_steps", r.warnings.degenerate_steps},
                      {"empty_distance_seeds", r.warnings.empty_distance_seeds},
                      {"full_distance_seeds", r.warnings.full_distance_seeds}}}});
}

void cmd_metrics(Context& ctx) {
    const ScalarField pred = ctx.required("pred");
    const ScalarField gt = ctx.required("gt");
    const double thr = num(ctx.cfg, "metrics.threshold");
    const Confusion c = confusion(pred, gt, thr);
    const Scores s = scores(c);
    json report = to_json(c);
    report.update(to_json(s));
    report["threshold"] = thr;
    ctx.write_json("metrics", report);
    ctx.write_text("reports/metrics.csv",
                   "tp,fp,fn,tn,dice,jaccard,precision,recall\n" + std::to_string(c.tp) + "," +
                       std::to_string(c.fp) + "," + std::to_string(c.fn) + "," +
                       std::to_string(c.tn) + "," + fmt(s.dice) + "," + fmt(s.jaccard) + "," +
                       fmt(s.precision) + "," + fmt(s.recall) + "\n");
}

void cmd_losses(Context& ctx) {
    const json& cfg = ctx.cfg;
    const ScalarField eps_true = ctx.required("eps_true");
    const ScalarField eps_hat = ctx.required("eps_hat");
    const ScalarField image = ctx.required("image");
    const ScalarField mask = ctx.required("mask");
    require_same_shape(image, mask, "losses inputs");
    const LevelSetConfig lc = levelset_config(cfg);
    const LsfSetup lsf{image, lc, area_prior(cfg, lc, mask)};
    const double w_t = num(cfg, "losses.w_t");
    const double l_dpm = parsed("losses.w_t", [&] { return dpm_loss(eps_true, eps_hat, w_t); });
    const double l_lsf = lsf_energy(lsf, mask, speed_params(cfg), eikonal_options(cfg)).total;
    const ParParams pp = par_params(cfg);
    const double l_par = par_loss(mask, refine(mask, affinity_kernel(image, pp), pp.tau)).sum;
    const double eta1 = num(cfg, "losses.eta1");
    const double eta2 = num(cfg, "losses.eta2");
    ctx.write_json("losses", {{"l_dpm", l_dpm},
                              {"l_lsf", l_lsf},
                              {"l_par", l_par},
                              {"eta1", eta1},
                              {"eta2", eta2},
                              {"w_t", w_t},
                              {"total", total_loss(l_dpm, l_lsf, l_par, eta1, eta2)}});
}

void write_manifest(Context& ctx) {
    json artifacts = json::object();
    for (const auto& rel : ctx.artifacts) {
        artifacts[rel] = hex64(fnv1a64(read_bytes(ctx.out / rel)));
    }
    const json m = {{"manifest_version", 1},
                    {"tool", kToolName},
                    {"tool_version", kToolVersion},
                    {"subcommand", ctx.command},
                    {"seed", ctx.cfg["seed"]},
                    {"rng", {{"algorithm", CounterRng::kAlgorithm}, {"version", CounterRng::kVersion}}},
                    {"config_hash", hex64(fnv1a64(ctx.cfg.dump()))},
                    {"config", ctx.cfg},
                    {"artifacts", artifacts}};
    const std::string text = m.dump(2) + "\n";
    write_bytes(ctx.out / "manifest.json",
                std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                              text.size()));
}

struct FlagSpec {
    const char* name;
    const char* path;
    const char* help;
};

struct CommandSpec {
    const char* name;
    const char* help;
    void (*handler)(Context&);
    std::vector<FlagSpec> flags;
};

const std::vector<CommandSpec>& commands() {
    static const FlagSpec kLambdas[] = {
        {"--epsilon", "levelset.epsilon", "Heaviside width"},
        {"--lambda-region", "levelset.lambda_region", "region weight"},
        {"--lambda-length", "levelset.lambda_length", "length weight"},
        {"--lambda-area", "levelset.lambda_area", "area weight"},
        {"--lambda-distance", "levelset.lambda_distance", "distance weight"},
        {"--mapping", "levelset.mapping", "mask to phi mapping: offset | literal"}};
    auto with_lambdas = [&](std::vector<FlagSpec> v) {
        v.insert(v.end(), std::begin(kLambdas), std::end(kLambdas));
        return v;
    };
    static const std::vector<CommandSpec> cmds = {
        {"phantom", "Generate a synthetic phantom image and mask", cmd_phantom,
         {{"--kind", "phantom.kind", "two-disks | ring-with-hole | c-shape | two-rects"},
          {"--size", "phantom.size", "side length in pixels (>= 32)"},
          {"--foreground", "phantom.foreground", "object intensity"},
          {"--background", "phantom.background", "background intensity"},
          {"--noise", "phantom.noise_sigma", "Gaussian noise level"},
          {"--foreground-noise", "phantom.foreground_noise_sigma", "noise level inside the object"}}},
        {"energy", "Evaluate the four-term level-set energy of a mask", cmd_energy,
         with_lambdas({{"--image", "inputs.image", "image field"},
                       {"--mask", "inputs.mask", "soft mask in [0,1]"},
                       {"--distance", "inputs.distance", "distance map (default: geodesic from the mask)"},
                       {"--edge-term", "inputs.edge_term", "optional D_E field for the speed"}})},
        {"evolve", "Run level-set gradient descent", cmd_evolve,
         with_lambdas({{"--image", "inputs.image", "image field"},
                       {"--mask", "inputs.mask", "initial mask (default: centred box)"},
                       {"--gt", "inputs.gt", "ground truth for the Dice report"},
                       {"--distance", "inputs.distance", "distance map (default: zero)"},
                       {"--dt", "evolve.dt", "time step"},
                       {"--steps", "evolve.steps", "number of steps"}})},
        {"td-verify", "Check topological derivatives against the nucleation oracle", cmd_td_verify,
         {{"--image", "inputs.image", "image field"},
          {"--mask", "inputs.mask", "partition mask"},
          {"--model", "td.model", "cv | gaussian"},
          {"--radius", "td.radius", "probe radius in pixels"},
          {"--samples", "td.samples", "number of probes"},
          {"--epsilon", "td.epsilon", "Heaviside width for the check"},
          {"--tie-fraction", "td.tie_fraction", "tie threshold as a fraction of max|T|"}}},
        {"geodesic", "Compute the speed field and normalized geodesic distance", cmd_geodesic,
         {{"--image", "inputs.image", "image field"},
          {"--mask", "inputs.mask", "seed mask"},
          {"--edge-term", "inputs.edge_term", "optional D_E field"},
          {"--eps-d", "speed.eps_d", "speed floor"},
          {"--beta-g", "speed.beta_g", "gradient weight"},
          {"--nu", "speed.nu", "edge-term weight"}}},
        {"par", "Refine a mask with pixel-adaptive affinities", cmd_par,
         {{"--image", "inputs.image", "image field"},
          {"--mask", "inputs.mask", "mask to refine"},
          {"--gt", "inputs.gt", "ground truth for the Dice report"},
          {"--tau", "par.tau", "iterations"},
          {"--feature", "par.feature", "intensity | intensity-position"},
          {"--position-weight", "par.position_weight", "position feature scale"}}},
        {"sample", "Energy-guided diffusion sampling with an analytic score", cmd_sample,
         with_lambdas({{"--image", "inputs.image", "image field (default: built-in disk image)"},
                       {"--gamma0", "guidance.gamma0", "guidance strength (0 disables)"},
                       {"--guidance-schedule", "guidance.schedule", "constant | noise-scaled"},
                       {"--formulation", "guidance.formulation", "noise | score"},
                       {"--ensemble", "sample.ensemble", "ensemble size"},
                       {"--steps", "diffusion.steps", "diffusion steps"},
                       {"--base-sigma", "provider.base_sigma", "mixture component spread"},
                       {"--size", "provider.size", "built-in setup side length"}})},
        {"metrics", "Confusion counts and overlap scores", cmd_metrics,
         {{"--pred", "inputs.pred", "prediction"},
          {"--gt", "inputs.gt", "binary ground truth"},
          {"--threshold", "metrics.threshold", "foreground threshold"}}},
        {"losses", "Assemble L_dpm + eta1 L_lsf + eta2 L_par", cmd_losses,
         with_lambdas({{"--image", "inputs.image", "image field"},
                       {"--mask", "inputs.mask", "clean-mask estimate"},
                       {"--eps-true", "inputs.eps_true", "true noise"},
                       {"--eps-hat", "inputs.eps_hat", "predicted noise"},
                       {"--eta1", "losses.eta1", "level-set loss weight"},
                       {"--eta2", "losses.eta2", "PAR loss weight"},
                       {"--w-t", "losses.w_t", "diffusion loss weight"}})},
    };
    return cmds;
}

}  // namespace

std::string default_config_json() { return defaults().dump(2); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Level-set energies, topological derivatives and energy-guided diffusion", "lsg"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);
    bool print_defaults = false;
    app.add_flag("--print-default-config", print_defaults, "Print the default config and exit");

    struct Parsed {
        std::string config;
        std::string out;
        std::optional<std::uint64_t> seed;
        std::vector<std::string> sets;
        std::map<std::string, std::string> flags;
    };
    std::map<std::string, Parsed> parsed_by_cmd;
    std::map<std::string, std::vector<std::pair<const FlagSpec*, std::string*>>> raw;
    std::vector<std::unique_ptr<std::string>> storage;
    for (const CommandSpec& c : commands()) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        Parsed& p = parsed_by_cmd[c.name];
        sub->add_option("--config", p.config, "JSON config or a previous run manifest");
        sub->add_option("--out", p.out, "output directory")->required();
        sub->add_option("--seed", p.seed, "random seed");
        sub->add_option("--set", p.sets, "override any config key: section.key=value");
        for (const FlagSpec& f : c.flags) {
            storage.push_back(std::make_unique<std::string>());
            std::string* slot = storage.back().get();
            sub->add_option(f.name, *slot, std::string(f.help) + " [" + f.path + "]");
            raw[c.name].emplace_back(&f, slot);
        }
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        if (std::find(args.begin(), args.end(), "--print-default-config") != args.end()) {
            out << default_config_json() << "\n";
            return kOk;
        }
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << "\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    const CommandSpec& spec = *std::find_if(commands().begin(), commands().end(),
                                            [&](const CommandSpec& c) { return name == c.name; });
    Parsed& p = parsed_by_cmd[name];
    try {
        json cfg = defaults();
        if (!p.config.empty()) {
            merge_checked(cfg, load_config_file(p.config), "");
        }
        if (!cfg["schema_version"].is_number_integer() ||
            cfg["schema_version"].get<int>() != kSchemaVersion) {
            throw ConfigError("unsupported schema_version (expected " +
                              std::to_string(kSchemaVersion) + ")");
        }
        for (const auto& [flag, value] : raw[name]) {
            if (sub->count(flag->name) > 0) {
                apply_override(cfg, flag->path, *value);
            }
        }
        for (const std::string& s : p.sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("--set expects section.key=value, got '" + s + "'");
            }
            apply_override(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        if (p.seed) {
            cfg["seed"] = *p.seed;
        }
        seed_of(cfg);
        Context ctx{name, cfg, fs::path(p.out), {}, out};
        fs::create_directories(ctx.out);
        spec.handler(ctx);
        write_manifest(ctx);
        out << name << ": wrote " << ctx.artifacts.size() << " artifacts to " << ctx.out.string()
            << "\n";
        return kOk;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << " (byte offset " << e.offset() << ")\n";
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
}

}  // namespace lsg::cli
