#include "config.hpp"

#include "spva/error.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace spva::cli {

namespace {

struct Profile {
    const char* name;
    double lambda, theta, tau, gamma;
};

constexpr Profile profiles[] = {
    {"heart_surgery", 1e4, 1e-5, 1e4, 5e4},
    {"human_face", 5e3, 1e-5, 5e3, 1e3},
    {"asl", 5e4, 1e-5, 4.2e3, 1e5},
};

const Profile& find_profile(const std::string& name)
{
    for (const Profile& p : profiles)
        if (name == p.name)
            return p;
    std::string known;
    for (const Profile& p : profiles)
        known += std::string(known.empty() ? "" : ", ") + p.name;
    throw InvalidInput("profile: unknown profile '" + name + "' (known: " + known + ")");
}

std::string join(const std::string& path, const std::string& key)
{
    return path.empty() ? key : path + "." + key;
}

void merge_strict(json& base, const json& patch, const std::string& path)
{
    if (!patch.is_object())
        throw InvalidInput((path.empty() ? std::string("config") : path) + ": expected an object");
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string here = join(path, it.key());
        if (!base.contains(it.key()))
            throw InvalidInput(here + ": unknown key");
        json& slot = base[it.key()];
        if (slot.is_object())
            merge_strict(slot, it.value(), here);
        else
            slot = it.value();
    }
}

// Typed extraction with the field path in every error.
class Reader {
public:
    Reader(const json& doc) : doc_(doc) {}

    const json& at(const std::string& path) const
    {
        const json* node = &doc_;
        std::size_t start = 0;
        while (true) {
            const std::size_t dot = path.find('.', start);
            const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
            if (!node->is_object() || !node->contains(key))
                throw InvalidInput(path + ": missing");
            node = &(*node)[key];
            if (dot == std::string::npos)
                return *node;
            start = dot + 1;
        }
    }

    double number(const std::string& path) const
    {
        const json& v = at(path);
        if (!v.is_number())
            throw InvalidInput(path + ": expected a number, got " + std::string(v.type_name()));
        return v.get<double>();
    }

    int integer(const std::string& path) const
    {
        const json& v = at(path);
        if (!v.is_number_integer())
            throw InvalidInput(path + ": expected an integer, got " + std::string(v.type_name()));
        const auto x = v.get<long long>();
        if (x < -2147483647LL || x > 2147483647LL)
            throw InvalidInput(path + ": integer out of range");
        return static_cast<int>(x);
    }

    std::uint64_t unsigned_integer(const std::string& path) const
    {
        const json& v = at(path);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw InvalidInput(path + ": expected a nonnegative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& path) const
    {
        const json& v = at(path);
        if (!v.is_boolean())
            throw InvalidInput(path + ": expected true or false, got " + std::string(v.type_name()));
        return v.get<bool>();
    }

    std::string string(const std::string& path) const
    {
        const json& v = at(path);
        if (!v.is_string())
            throw InvalidInput(path + ": expected a string, got " + std::string(v.type_name()));
        return v.get<std::string>();
    }

    template <typename F>
    auto parsed(const std::string& path, F parse) const
    {
        try {
            return parse(string(path));
        } catch (const InvalidInput& e) {
            if (std::string(e.what()).rfind(path, 0) == 0)
                throw;
            throw InvalidInput(path + ": " + e.what());
        }
    }

    template <typename T, typename F>
    std::vector<T> list(const std::string& path, F element) const
    {
        const json& v = at(path);
        if (!v.is_array())
            throw InvalidInput(path + ": expected an array");
        std::vector<T> out;
        for (std::size_t i = 0; i < v.size(); ++i)
            out.push_back(element(v[i], path + "[" + std::to_string(i) + "]"));
        return out;
    }

private:
    const json& doc_;
};

// Prefixes a module's own validation message with the config section.
template <typename F>
void checked(const std::string& section, F check)
{
    try {
        check();
    } catch (const InvalidInput& e) {
        throw InvalidInput(section + ": " + e.what());
    }
}

RunConfig from_json(const json& doc)
{
    const Reader r(doc);
    RunConfig c;
    c.profile = r.string("profile");
    find_profile(c.profile);

    c.paths.output_dir = r.string("paths.output_dir");
    c.paths.measurements = r.string("paths.measurements");
    c.paths.mask = r.string("paths.mask");
    c.paths.frames_dir = r.string("paths.frames_dir");
    c.paths.flows_dir = r.string("paths.flows_dir");
    c.paths.occlusion_dir = r.string("paths.occlusion_dir");
    c.paths.prior = r.string("paths.prior");
    c.paths.shapes = r.string("paths.shapes");
    c.paths.reference = r.string("paths.reference");

    SolverParams& s = c.solver;
    s.lambda = r.number("solver.lambda");
    s.gamma = r.number("solver.gamma");
    s.tau = r.number("solver.tau");
    s.theta = r.number("solver.theta");
    s.sigma_dual = r.number("solver.sigma");
    s.max_outer = r.integer("solver.max_outer");
    s.max_pd = r.integer("solver.max_pd");
    s.max_si = r.integer("solver.max_si");
    s.tol_outer = r.number("solver.tol_outer");
    s.tol_pd = r.number("solver.tol_pd");
    s.tol_si = r.number("solver.tol_si");
    s.tv_enabled = r.boolean("solver.tv_enabled");

    OcclusionSection& o = c.occlusion;
    o.params.kernel_size = r.integer("occlusion.kernel_size");
    o.params.kernel_sigma = r.number("occlusion.kernel_sigma");
    o.params.normalization = r.parsed("occlusion.normalization", [](const std::string& v) {
        if (v == "fixed_range") return OcclusionNormalization::fixed_range;
        if (v == "tensor_max") return OcclusionNormalization::tensor_max;
        throw InvalidInput("unknown normalization '" + v + "' (fixed_range, tensor_max)");
    });
    o.window.epsilon = r.number("occlusion.epsilon");
    o.window.epsilon_prime = r.number("occlusion.epsilon_prime");
    o.window.min_window = r.integer("occlusion.min_window");
    o.weights.binarize = r.boolean("occlusion.binarize");
    o.weights.binarize_threshold = r.number("occlusion.binarize_threshold");
    o.weights.average_map = r.boolean("occlusion.average_map");

    PriorSection& p = c.prior;
    p.mode = r.parsed("prior.mode", prior_mode_from_string);
    p.window = r.integer("prior.window");
    p.options.min_window = r.integer("prior.min_window");
    p.options.policy = r.parsed("prior.policy", extension_policy_from_string);
    p.options.seed = r.parsed("prior.window_seed", window_seed_from_string);
    p.options.estimate_scale = !r.boolean("prior.rigid_only");
    p.options.resolve_mirror = r.boolean("prior.resolve_mirror");
    p.options.min_anchors = r.integer("prior.min_anchors");
    p.options.max_anchors = r.integer("prior.max_anchors");

    c.eval.align = r.parsed("eval.align", alignment_from_string);
    c.eval.occluded_first = r.integer("eval.occluded_first");
    c.eval.occluded_last = r.integer("eval.occluded_last");

    SheetSceneConfig& sc = c.bench.scene;
    sc.grid_w = r.integer("scene.grid_w");
    sc.grid_h = r.integer("scene.grid_h");
    sc.frames = r.integer("scene.frames");
    sc.deform.amplitude = r.number("scene.amplitude");
    sc.deform.frequency = r.number("scene.frequency");
    sc.deform.phase_speed = r.number("scene.phase_speed");
    sc.deform.bend = r.number("scene.bend");
    sc.view_tilt_deg = r.number("scene.view_tilt_deg");
    sc.wobble_deg = r.number("scene.wobble_deg");
    sc.wobble_period = r.number("scene.wobble_period");
    sc.margin = r.integer("scene.margin");
    sc.seed = r.unsigned_integer("scene.seed");
    sc.render = true;

    OccluderSpec& oc = c.bench.occluder;
    oc.pattern = r.parsed("occluder.pattern", occluder_pattern_from_string);
    oc.stripe_width = r.integer("occluder.stripe_width");
    oc.stripe_period = r.integer("occluder.stripe_period");
    oc.grid_pitch = r.integer("occluder.grid_pitch");
    oc.grid_thickness = r.integer("occluder.grid_thickness");
    oc.box_x = r.integer("occluder.box_x");
    oc.box_y = r.integer("occluder.box_y");
    oc.box_w = r.integer("occluder.box_w");
    oc.box_h = r.integer("occluder.box_h");
    oc.first_frame = r.integer("occluder.first_frame");
    oc.last_frame = r.integer("occluder.last_frame");
    oc.color = r.number("occluder.color");

    CorruptionSpec& cs = c.bench.corruption;
    cs.model = r.parsed("corruption.model", corruption_model_from_string);
    cs.sigma = r.number("corruption.sigma");
    cs.seed = r.unsigned_integer("corruption.seed");

    c.bench.modes = r.list<PriorMode>("bench.modes", [](const json& v, const std::string& path) {
        if (!v.is_string())
            throw InvalidInput(path + ": expected a string");
        try {
            return prior_mode_from_string(v.get<std::string>());
        } catch (const InvalidInput& e) {
            throw InvalidInput(path + ": " + e.what());
        }
    });
    c.bench.gamma_sweep = r.list<double>("bench.gamma_sweep", [](const json& v, const std::string& path) {
        if (!v.is_number())
            throw InvalidInput(path + ": expected a number");
        return v.get<double>();
    });
    c.bench.sweep_mode = r.parsed("bench.sweep_mode", prior_mode_from_string);
    c.bench.parallel = r.boolean("bench.parallel");

    c.ply_frames = r.list<int>("output.ply_frames", [](const json& v, const std::string& path) {
        if (!v.is_number_integer())
            throw InvalidInput(path + ": expected an integer frame number");
        return v.get<int>();
    });
    c.write_frames = r.boolean("output.write_frames");

    c.bench.solver = c.solver;
    c.bench.occlusion = c.occlusion.params;
    c.bench.window = c.occlusion.window;
    c.bench.weights = c.occlusion.weights;
    c.bench.prior = c.prior.options;
    return c;
}

}  // namespace

std::vector<std::string> profile_names()
{
    std::vector<std::string> out;
    for (const Profile& p : profiles)
        out.emplace_back(p.name);
    return out;
}

json to_json(const RunConfig& c)
{
    json j;
    j["profile"] = c.profile;
    j["paths"] = {
        {"output_dir", c.paths.output_dir},   {"measurements", c.paths.measurements},
        {"mask", c.paths.mask},               {"frames_dir", c.paths.frames_dir},
        {"flows_dir", c.paths.flows_dir},     {"occlusion_dir", c.paths.occlusion_dir},
        {"prior", c.paths.prior},             {"shapes", c.paths.shapes},
        {"reference", c.paths.reference},
    };
    const SolverParams& s = c.solver;
    j["solver"] = {
        {"lambda", s.lambda},       {"gamma", s.gamma},       {"tau", s.tau},
        {"theta", s.theta},         {"sigma", s.sigma_dual},  {"max_outer", s.max_outer},
        {"max_pd", s.max_pd},       {"max_si", s.max_si},     {"tol_outer", s.tol_outer},
        {"tol_pd", s.tol_pd},       {"tol_si", s.tol_si},     {"tv_enabled", s.tv_enabled},
    };
    const OcclusionSection& o = c.occlusion;
    j["occlusion"] = {
        {"kernel_size", o.params.kernel_size},
        {"kernel_sigma", o.params.kernel_sigma},
        {"normalization", o.params.normalization == OcclusionNormalization::tensor_max
                              ? "tensor_max" : "fixed_range"},
        {"epsilon", o.window.epsilon},
        {"epsilon_prime", o.window.epsilon_prime},
        {"min_window", o.window.min_window},
        {"binarize", o.weights.binarize},
        {"binarize_threshold", o.weights.binarize_threshold},
        {"average_map", o.weights.average_map},
    };
    const PriorSection& p = c.prior;
    j["prior"] = {
        {"mode", to_string(p.mode)},
        {"window", p.window},
        {"min_window", p.options.min_window},
        {"policy", to_string(p.options.policy)},
        {"window_seed", to_string(p.options.seed)},
        {"rigid_only", !p.options.estimate_scale},
        {"resolve_mirror", p.options.resolve_mirror},
        {"min_anchors", p.options.min_anchors},
        {"max_anchors", p.options.max_anchors},
    };
    j["eval"] = {
        {"align", to_string(c.eval.align)},
        {"occluded_first", c.eval.occluded_first},
        {"occluded_last", c.eval.occluded_last},
    };
    const SheetSceneConfig& sc = c.bench.scene;
    j["scene"] = {
        {"grid_w", sc.grid_w},
        {"grid_h", sc.grid_h},
        {"frames", sc.frames},
        {"amplitude", sc.deform.amplitude},
        {"frequency", sc.deform.frequency},
        {"phase_speed", sc.deform.phase_speed},
        {"bend", sc.deform.bend},
        {"view_tilt_deg", sc.view_tilt_deg},
        {"wobble_deg", sc.wobble_deg},
        {"wobble_period", sc.wobble_period},
        {"margin", sc.margin},
        {"seed", sc.seed},
    };
    const OccluderSpec& oc = c.bench.occluder;
    j["occluder"] = {
        {"pattern", to_string(oc.pattern)},
        {"stripe_width", oc.stripe_width},
        {"stripe_period", oc.stripe_period},
        {"grid_pitch", oc.grid_pitch},
        {"grid_thickness", oc.grid_thickness},
        {"box_x", oc.box_x},
        {"box_y", oc.box_y},
        {"box_w", oc.box_w},
        {"box_h", oc.box_h},
        {"first_frame", oc.first_frame},
        {"last_frame", oc.last_frame},
        {"color", oc.color},
    };
    j["corruption"] = {
        {"model", to_string(c.bench.corruption.model)},
        {"sigma", c.bench.corruption.sigma},
        {"seed", c.bench.corruption.seed},
    };
    json modes = json::array();
    for (PriorMode m : c.bench.modes)
        modes.push_back(to_string(m));
    j["bench"] = {
        {"modes", modes},
        {"gamma_sweep", c.bench.gamma_sweep},
        {"sweep_mode", to_string(c.bench.sweep_mode)},
        {"parallel", c.bench.parallel},
    };
    j["output"] = {
        {"ply_frames", c.ply_frames},
        {"write_frames", c.write_frames},
    };
    return j;
}

void RunConfig::validate() const
{
    checked("solver", [&] { solver.validate(); });
    checked("occlusion", [&] {
        occlusion.params.validate();
        occlusion.window.validate();
    });
    if (!(occlusion.weights.binarize_threshold >= 0.0 && occlusion.weights.binarize_threshold <= 1.0))
        throw InvalidInput("occlusion.binarize_threshold must lie in [0, 1]");
    checked("prior", [&] { prior.options.validate(); });
    if (prior.window < 0)
        throw InvalidInput("prior.window must be >= 0 (0 selects it automatically)");
    checked("scene", [&] { bench.scene.validate(); });
    checked("occluder", [&] { bench.occluder.validate(bench.scene.frames); });
    if (!(bench.corruption.sigma >= 0.0) || !std::isfinite(bench.corruption.sigma))
        throw InvalidInput("corruption.sigma must be >= 0 and finite");
    checked("bench", [&] { bench.validate(); });
    for (int f : ply_frames)
        if (f < 1)
            throw InvalidInput("output.ply_frames: frame numbers are 1-based");
    if (paths.output_dir.empty())
        throw InvalidInput("paths.output_dir must not be empty");
}

RunConfig load_config(const std::string& file, const std::vector<std::string>& overrides)
{
    json user = json::object();
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in)
            throw FormatError("cannot open config file " + file);
        try {
            user = json::parse(in, nullptr, true, true);
        } catch (const json::parse_error& e) {
            throw InvalidInput("config " + file + ": " + e.what());
        }
        if (!user.is_object())
            throw InvalidInput("config " + file + ": top level must be an object");
    }

    std::vector<std::pair<std::string, json>> sets;
    for (const std::string& o : overrides) {
        const std::size_t eq = o.find('=');
        if (eq == std::string::npos || eq == 0)
            throw InvalidInput("override '" + o + "' must have the form path.to.key=value");
        const std::string key = o.substr(0, eq), text = o.substr(eq + 1);
        json value;
        try {
            value = json::parse(text);
        } catch (const json::parse_error&) {
            value = text;
        }
        json patch = value;
        std::string rest = key;
        std::vector<std::string> parts;
        for (std::size_t start = 0;;) {
            const std::size_t dot = rest.find('.', start);
            parts.push_back(rest.substr(start, dot == std::string::npos ? dot : dot - start));
            if (dot == std::string::npos)
                break;
            start = dot + 1;
        }
        for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
            if (it->empty())
                throw InvalidInput("override '" + o + "' has an empty key segment");
            patch = json{{*it, patch}};
        }
        sets.emplace_back(key, patch);
    }

    // The profile seeds the solver weights before the file and overrides.
    std::string profile = RunConfig{}.profile;
    if (user.contains("profile")) {
        if (!user["profile"].is_string())
            throw InvalidInput("profile: expected a string");
        profile = user["profile"].get<std::string>();
    }
    for (const auto& [key, patch] : sets)
        if (key == "profile") {
            if (!patch["profile"].is_string())
                throw InvalidInput("profile: expected a string");
            profile = patch["profile"].get<std::string>();
        }
    const Profile& prof = find_profile(profile);
    RunConfig defaults;
    defaults.profile = prof.name;
    defaults.solver.lambda = prof.lambda;
    defaults.solver.theta = prof.theta;
    defaults.solver.tau = prof.tau;
    defaults.solver.gamma = prof.gamma;

    json doc = to_json(defaults);
    merge_strict(doc, user, "");
    for (const auto& [key, patch] : sets)
        merge_strict(doc, patch, "");
    RunConfig config = from_json(doc);
    config.validate();
    return config;
}

}  // namespace spva::cli
