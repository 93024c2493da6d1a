// slidereg: elastic image comparison with sliding boundaries.
//
// Subcommands: register, verify, template, psi-probe, gradcheck.
// Runs are reproducible: a config file plus a seed determines every artifact
// byte; wall-clock metadata goes to a separate metadata.json.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "slidereg/assembly.hpp"
#include "slidereg/pnm_io.hpp"
#include "slidereg/report_io.hpp"
#include "slidereg/solver.hpp"
#include "slidereg/template_fit.hpp"
#include "slidereg/verify.hpp"

namespace fs = std::filesystem;
using namespace slidereg;

namespace {

// Exit codes (shared across subcommands where applicable):
//   0 success/converged, 1 verification failure, 2 max-iterations,
//   3 infeasibility, 4 unreadable input, 5 invalid config.
constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitMaxIterations = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitUnreadable = 4;
constexpr int kExitInvalidConfig = 5;

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file '" + path + "' is not readable");
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

struct RunConfig {
    std::string config_path;
    std::string image1, image2;
    std::string synthetic;
    std::string out_dir = "out";
    std::string family = "sv";
    std::string mismatch_form = "8a";
    double mismatch_weight = 1.0;
    double alpha = 4.0;
    double h2_weight = 0.0;
    int resolution = 33;
    int levels = 3;
    int max_iterations = 2000;
    double grad_tolerance = 1e-6;
    std::uint64_t seed = 20240101;
    int warp_size = 128;
    double domain_width = 0.0; // 0 = aspect ratio
    double domain_height = 1.0;
    std::string experiments = "all";
    // template registration
    std::string template_path, scene_path;
    double scene_width = 0.0, scene_height = 1.0;
    double pose_x = 0.0, pose_y = 0.0, pose_theta = 0.0, pose_lambda = 1.0;
    double lambda_min = 0.5, lambda_max = 2.0;

    void absorb(const std::map<std::string, std::string>& kv) {
        auto get = [&](const char* key) -> std::optional<std::string> {
            const auto it = kv.find(key);
            if (it == kv.end()) return std::nullopt;
            return it->second;
        };
        auto num = [&](const char* key, double& slot) {
            if (auto v = get(key)) {
                try {
                    slot = std::stod(*v);
                } catch (...) {
                    throw ConfigError(std::string("config key '") + key + "': not a number");
                }
            }
        };
        auto integer = [&](const char* key, int& slot) {
            double d = slot;
            num(key, d);
            slot = static_cast<int>(d);
        };
        if (auto v = get("image1")) image1 = *v;
        if (auto v = get("image2")) image2 = *v;
        if (auto v = get("synthetic")) synthetic = *v;
        if (auto v = get("out")) out_dir = *v;
        if (auto v = get("family")) family = *v;
        if (auto v = get("mismatch-form")) mismatch_form = *v;
        num("mismatch-weight", mismatch_weight);
        num("alpha", alpha);
        num("h2-weight", h2_weight);
        integer("resolution", resolution);
        integer("levels", levels);
        integer("max-iterations", max_iterations);
        num("grad-tol", grad_tolerance);
        if (auto v = get("seed")) seed = std::stoull(*v);
        integer("warp-size", warp_size);
        num("domain-width", domain_width);
        num("domain-height", domain_height);
        if (auto v = get("experiments")) experiments = *v;
        if (auto v = get("template")) template_path = *v;
        if (auto v = get("scene")) scene_path = *v;
        num("scene-width", scene_width);
        num("scene-height", scene_height);
        num("pose-x", pose_x);
        num("pose-y", pose_y);
        num("pose-theta", pose_theta);
        num("pose-lambda", pose_lambda);
        num("lambda-min", lambda_min);
        num("lambda-max", lambda_max);
    }

    EnergyModel model() const {
        if (family != "sv" && family != "fluid")
            throw ConfigError("family must be 'sv' or 'fluid'");
        if (mismatch_form != "8a" && mismatch_form != "8b")
            throw ConfigError("mismatch-form must be '8a' or '8b'");
        const ElasticParams elastic = (family == "sv") ? ElasticParams::singular_value(alpha)
                                                       : ElasticParams::fluid(alpha);
        const MismatchForm form =
            (mismatch_form == "8a") ? MismatchForm::Form8a : MismatchForm::Form8b;
        return {elastic, MismatchParams::make(form, mismatch_weight)};
    }

    SolverConfig solver() const {
        SolverConfig s;
        s.max_iterations = max_iterations;
        s.grad_tolerance = grad_tolerance;
        s.levels = levels;
        s.h2_weight = h2_weight;
        s.validate();
        return s;
    }
};

void write_metadata(const std::string& dir) {
    const auto now = std::chrono::system_clock::now();
    Json j;
    j["wall_clock_unix_seconds"] =
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    write_text_file((fs::path(dir) / "metadata.json").string(), j.dump(2) + "\n");
}

struct RegistrationPair {
    Image img1;
    Image img2;
    BoundaryChart chart;
    std::optional<AffineMap2> reference; // ground truth when synthetic
};

Image synthetic_by_name(const std::string& kind, const Domain2& dom) {
    if (kind == "asym") return fixtures::asymmetric_smooth(dom);
    return synthetic_image(kind, dom);
}

/// --synthetic grammar: "KIND" (identity pair) or "REL:PARAM:KIND" with
/// REL in {identity, scale, rotate, shear}; KIND is one of the four patterns
/// or "asym".
RegistrationPair make_synthetic_pair(const std::string& spec) {
    std::string rel = "identity", kind = spec;
    double param = 0.0;
    const auto c1 = spec.find(':');
    if (c1 != std::string::npos) {
        rel = spec.substr(0, c1);
        const auto c2 = spec.find(':', c1 + 1);
        if (c2 == std::string::npos)
            throw ConfigError("--synthetic: expected REL:PARAM:KIND, got '" + spec + "'");
        try {
            param = std::stod(spec.substr(c1 + 1, c2 - c1 - 1));
        } catch (...) {
            throw ConfigError("--synthetic: bad parameter in '" + spec + "'");
        }
        kind = spec.substr(c2 + 1);
    }
    const Domain2 dom = Domain2::unit_square();
    Image img1 = synthetic_by_name(kind, dom);
    AffineMap2 T;
    if (rel == "identity") {
        T = AffineMap2{};
    } else if (rel == "scale") {
        if (!(param > 0.0)) throw ConfigError("--synthetic scale: parameter must be > 0");
        T = AffineMap2{Mat2::identity() * param, {0.0, 0.0}};
    } else if (rel == "rotate") {
        T = AffineMap2::rotation_about(param, dom.center());
    } else if (rel == "shear") {
        T = AffineMap2{Mat2{1.0, param, 0.0, 1.0}, {0.0, 0.0}};
    } else {
        throw ConfigError("--synthetic: unknown relation '" + rel + "'");
    }
    Image img2 = transform_image(img1, T);
    const auto rc = dom.corners();
    BoundaryChart chart(T(rc[0]), T(rc[1]), T(rc[2]), T(rc[3]));
    RegistrationPair pair{std::move(img1), std::move(img2), std::move(chart), T};
    return pair;
}

int cmd_register(const RunConfig& cfg) {
    std::optional<RegistrationPair> pair;
    if (!cfg.synthetic.empty()) {
        pair.emplace(make_synthetic_pair(cfg.synthetic));
    } else {
        if (cfg.image1.empty() || cfg.image2.empty())
            throw ConfigError("register needs --image1/--image2 or --synthetic");
        Image img1 = load_image(cfg.image1, cfg.domain_width, cfg.domain_height);
        Image img2 = load_image(cfg.image2, cfg.domain_width, cfg.domain_height);
        BoundaryChart chart = BoundaryChart::rectangle(img2.domain());
        pair.emplace(RegistrationPair{std::move(img1), std::move(img2), std::move(chart),
                                      std::nullopt});
    }

    fs::create_directories(cfg.out_dir);
    const EnergyModel model = cfg.model();
    const SolverConfig scfg = cfg.solver();

    MinimizeOptions opts;
    if (pair->reference) {
        const AffineMap2 ref = *pair->reference;
        opts.reference_map = [ref](Vec2 x) { return ref(x); };
    }

    SolveReport rep;
    if (scfg.levels > 1) {
        rep = minimize_multiresolution(model, pair->img1, pair->img2, cfg.resolution,
                                       cfg.resolution, pair->chart, scfg, opts);
    } else {
        const TriMesh mesh = build_mesh(pair->img1.domain(), cfg.resolution, cfg.resolution);
        rep = minimize(model, pair->img1, pair->img2, mesh, pair->chart, scfg,
                       initial_guess(mesh, pair->chart), opts);
    }

    const TriMesh mesh = build_mesh(pair->img1.domain(), cfg.resolution, cfg.resolution);
    Json report = solve_report_to_json(rep);
    report["subcommand"] = "register";
    report["family"] = cfg.family;
    report["mismatch_form"] = cfg.mismatch_form;
    report["alpha"] = cfg.alpha;
    report["resolution"] = cfg.resolution;
    report["levels"] = cfg.levels;
    report["seed"] = cfg.seed;
    write_text_file((fs::path(cfg.out_dir) / "report.json").string(), report.dump(2) + "\n");
    write_text_file((fs::path(cfg.out_dir) / "trace.csv").string(), trace_to_csv(rep.trace));
    write_text_file((fs::path(cfg.out_dir) / "deformation.csv").string(),
                    deformation_to_csv(mesh, pair->chart, rep.state));

    int ww = cfg.warp_size, wh = cfg.warp_size;
    if (pair->img2.is_raster()) {
        ww = pair->img2.raster().width;
        wh = pair->img2.raster().height;
    }
    const RasterData warped =
        pullback_warp(pair->img1, mesh, rep.positions, pair->img2.domain(), ww, wh);
    const char* ext = (pair->img1.channels() == 3) ? "warped.ppm" : "warped.pgm";
    write_pnm((fs::path(cfg.out_dir) / ext).string(), warped);
    write_metadata(cfg.out_dir);

    std::cout << "register: " << rep.termination << ", energy " << format_double(rep.final_energy)
              << " after " << rep.iterations << " iterations\n";
    if (rep.termination == "converged") return kExitOk;
    if (rep.termination == "max-iterations") return kExitMaxIterations;
    return kExitInfeasible;
}

int cmd_verify(const RunConfig& cfg) {
    std::vector<std::string> ids;
    if (cfg.experiments == "all" || cfg.experiments.empty()) {
        ids = ExperimentSpec::ids();
    } else {
        std::stringstream ss(cfg.experiments);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok.empty()) continue;
            const auto& known = ExperimentSpec::ids();
            if (std::find(known.begin(), known.end(), tok) == known.end())
                throw UnknownExperimentError("unknown experiment '" + tok + "'");
            ids.push_back(tok);
        }
        if (ids.empty()) throw ConfigError("verify: empty experiment list");
    }
    fs::create_directories(cfg.out_dir);

    std::vector<Certificate> certs;
    bool all_pass = true;
    for (const std::string& id : ids) {
        ExperimentSpec spec;
        spec.id = id;
        spec.seed = cfg.seed;
        spec.resolution = cfg.resolution;
        spec.artifact_dir = cfg.out_dir;
        const Certificate cert = run_experiment(spec);
        certs.push_back(cert);
        all_pass = all_pass && cert.pass;
        std::cout << (cert.pass ? "[PASS] " : "[FAIL] ") << cert.id
                  << (cert.exploratory ? " (exploratory)" : "")
                  << "  margin=" << format_double(cert.worst_margin)
                  << "  tol=" << format_double(cert.tolerance) << "\n";
    }
    write_text_file((fs::path(cfg.out_dir) / "summary.csv").string(),
                    certificates_to_csv(certs));
    write_metadata(cfg.out_dir);
    return all_pass ? kExitOk : kExitVerifyFail;
}

int cmd_template(const RunConfig& cfg) {
    if (cfg.template_path.empty() || cfg.scene_path.empty())
        throw ConfigError("template needs 'template' and 'scene' image paths");
    const Image tmpl = load_image(cfg.template_path, cfg.domain_width, cfg.domain_height);
    const Image scene = load_image(cfg.scene_path, cfg.scene_width, cfg.scene_height);
    const TemplatePose pose0{{cfg.pose_x, cfg.pose_y}, cfg.pose_theta, cfg.pose_lambda};
    const TemplateBounds bounds{cfg.lambda_min, cfg.lambda_max};

    fs::create_directories(cfg.out_dir);
    const TemplateReport rep = register_template(cfg.model(), tmpl, scene, cfg.resolution,
                                                 cfg.resolution, pose0, bounds, cfg.solver());

    Json j;
    j["subcommand"] = "template";
    j["pose"] = {{"x", rep.pose.translation.x},
                 {"y", rep.pose.translation.y},
                 {"theta", rep.pose.theta},
                 {"lambda", rep.pose.lambda}};
    j["termination"] = rep.termination;
    j["iterations"] = rep.iterations;
    j["initial_energy"] = rep.initial_energy;
    j["final_energy"] = rep.final_energy;
    j["elastic"] = rep.elastic;
    j["mismatch"] = rep.mismatch;
    j["min_det"] = rep.min_det;
    write_text_file((fs::path(cfg.out_dir) / "pose.json").string(), j.dump(2) + "\n");

    const TriMesh mesh = build_mesh(tmpl.domain(), cfg.resolution, cfg.resolution);
    const BoundaryChart ref_chart = BoundaryChart::rectangle(tmpl.domain());
    write_text_file((fs::path(cfg.out_dir) / "inner_deformation.csv").string(),
                    deformation_to_csv(mesh, ref_chart, rep.inner));

    // overlay: recovered template boundary drawn into the scene raster
    RasterData overlay = scene.is_raster() ? scene.raster() : rasterize(scene, 256, 256);
    const AffineMap2 T = rep.pose.map();
    const Domain2& sd = scene.domain();
    const auto corners = tmpl.domain().corners();
    for (int k = 0; k < 4; ++k) {
        const Vec2 a = T(corners[static_cast<std::size_t>(k)]), b = T(corners[static_cast<std::size_t>((k + 1) % 4)]);
        const int steps = 2 * std::max(overlay.width, overlay.height);
        for (int s = 0; s <= steps; ++s) {
            const Vec2 p = a + (b - a) * (static_cast<double>(s) / steps);
            const int i = static_cast<int>((p.x - sd.origin.x) / sd.width * overlay.width);
            const int jrow = static_cast<int>((p.y - sd.origin.y) / sd.height * overlay.height);
            if (i >= 0 && i < overlay.width && jrow >= 0 && jrow < overlay.height)
                for (int c = 0; c < overlay.channels; ++c) overlay.at(i, jrow, c) = 1.0;
        }
    }
    write_pnm((fs::path(cfg.out_dir) / (overlay.channels == 3 ? "overlay.ppm" : "overlay.pgm"))
                  .string(),
              overlay);
    write_metadata(cfg.out_dir);

    std::cout << "template: " << rep.termination << ", pose (" << format_double(rep.pose.translation.x)
              << ", " << format_double(rep.pose.translation.y) << ", theta "
              << format_double(rep.pose.theta) << ", lambda " << format_double(rep.pose.lambda)
              << ")\n";
    return rep.termination == "max-iterations" ? kExitMaxIterations : kExitOk;
}

int cmd_psi_probe(const std::string& matrix, const std::string& c1s, const std::string& c2s,
                  const RunConfig& cfg) {
    auto parse_list = [](const std::string& s) {
        std::vector<double> v;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
        return v;
    };
    std::vector<double> me;
    try {
        me = parse_list(matrix);
    } catch (...) {
        throw ConfigError("psi-probe: --matrix expects a,b,c,d");
    }
    if (me.size() != 4) throw ConfigError("psi-probe: --matrix expects 4 comma-separated entries");
    const Mat2 A{me[0], me[1], me[2], me[3]};
    Color c1{0, 0, 0}, c2{0, 0, 0};
    auto fill = [&](const std::string& s, Color& c) {
        if (s.empty()) return;
        const auto v = parse_list(s);
        if (v.size() > 3) throw ConfigError("psi-probe: intensity takes at most 3 channels");
        for (std::size_t k = 0; k < v.size(); ++k) c[k] = v[k];
    };
    fill(c1s, c1);
    fill(c2s, c2);

    const EnergyModel m = cfg.model();
    const double psi = psi_eval(m, c1, c2, A);
    const Mat2 g = psi_grad_A(m, c1, c2, A);
    const CauchyStress stress = cauchy_stress(m.elastic, A);
    std::printf("psi = %.17g\n", psi);
    std::printf("dpsi_dA = [[%.17g, %.17g], [%.17g, %.17g]]\n", g.a, g.b, g.c, g.d);
    std::printf("stress_deviation = %.17g\n", stress.deviation);
    return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg) {
    ExperimentSpec spec;
    spec.id = "gradcheck";
    spec.seed = cfg.seed;
    const Certificate cert = run_experiment(spec);
    std::cout << (cert.pass ? "[PASS] " : "[FAIL] ") << "gradcheck worst relative error "
              << format_double(cert.worst_margin) << " (tol " << format_double(cert.tolerance)
              << ")\n";
    return cert.pass ? kExitOk : kExitVerifyFail;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"slidereg: elastic image comparison with sliding boundaries"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;
    std::string matrix, probe_c1, probe_c2;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file");
        sub->add_option("--out", cfg.out_dir, "output directory");
        sub->add_option("--seed", cfg.seed, "RNG seed");
        sub->add_option("--resolution", cfg.resolution, "mesh nodes per side");
        sub->add_option("--levels", cfg.levels, "multiresolution levels");
        sub->add_option("--alpha", cfg.alpha, "elastic exponent (> 2)");
        sub->add_option("--mismatch", cfg.mismatch_form, "mismatch form: 8a or 8b");
        sub->add_option("--mismatch-weight", cfg.mismatch_weight, "mismatch weight");
        sub->add_option("--family", cfg.family, "elastic family: sv or fluid");
        sub->add_option("--h2-weight", cfg.h2_weight, "second-gradient term weight");
        sub->add_option("--max-iterations", cfg.max_iterations, "solver iteration cap");
        sub->add_option("--grad-tol", cfg.grad_tolerance, "relative gradient tolerance");
    };

    CLI::App* reg = app.add_subcommand("register", "minimize the comparison energy for a pair");
    add_common(reg);
    reg->add_option("--image1", cfg.image1, "reference image (PGM/PPM)");
    reg->add_option("--image2", cfg.image2, "target image (PGM/PPM)");
    reg->add_option("--synthetic", cfg.synthetic, "synthetic pair spec (KIND or REL:PARAM:KIND)");
    reg->add_option("--domain-width", cfg.domain_width, "physical width (0 = aspect ratio)");
    reg->add_option("--domain-height", cfg.domain_height, "physical height");

    CLI::App* ver = app.add_subcommand("verify", "run analytic-property certificates");
    add_common(ver);
    ver->add_option("--experiments", cfg.experiments, "comma list or 'all'");

    CLI::App* tpl = app.add_subcommand("template", "register a template into a scene");
    add_common(tpl);
    tpl->add_option("--template", cfg.template_path, "template image");
    tpl->add_option("--domain-width", cfg.domain_width, "template physical width (0 = aspect)");
    tpl->add_option("--domain-height", cfg.domain_height, "template physical height");
    tpl->add_option("--scene", cfg.scene_path, "scene image");
    tpl->add_option("--scene-width", cfg.scene_width, "scene physical width (0 = aspect)");
    tpl->add_option("--scene-height", cfg.scene_height, "scene physical height");
    tpl->add_option("--pose-x", cfg.pose_x, "initial translation x");
    tpl->add_option("--pose-y", cfg.pose_y, "initial translation y");
    tpl->add_option("--pose-theta", cfg.pose_theta, "initial angle");
    tpl->add_option("--pose-lambda", cfg.pose_lambda, "initial scale");
    tpl->add_option("--lambda-min", cfg.lambda_min, "scale lower bound");
    tpl->add_option("--lambda-max", cfg.lambda_max, "scale upper bound");

    CLI::App* probe = app.add_subcommand("psi-probe", "print psi, dpsi/dA, stress deviation");
    add_common(probe);
    probe->add_option("--matrix", matrix, "a,b,c,d (row-major)")->required();
    probe->add_option("--c1", probe_c1, "intensity 1 (comma channels)");
    probe->add_option("--c2", probe_c2, "intensity 2 (comma channels)");

    CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
    add_common(gc);

    CLI11_PARSE(app, argc, argv);

    try {
        // config file first, then CLI overrides (re-parse onto a fresh config)
        if (!config_path.empty()) {
            RunConfig from_file;
            from_file.absorb(parse_config_file(config_path));
            // overlay CLI-provided values: CLI11 already wrote into cfg, so
            // copy file values only where the CLI left defaults untouched
            RunConfig defaults;
            auto pick = [](auto cli_value, auto default_value, auto file_value) {
                return cli_value != default_value ? cli_value : file_value;
            };
            from_file.image1 = pick(cfg.image1, defaults.image1, from_file.image1);
            from_file.image2 = pick(cfg.image2, defaults.image2, from_file.image2);
            from_file.synthetic = pick(cfg.synthetic, defaults.synthetic, from_file.synthetic);
            from_file.out_dir = pick(cfg.out_dir, defaults.out_dir, from_file.out_dir);
            from_file.family = pick(cfg.family, defaults.family, from_file.family);
            from_file.mismatch_form =
                pick(cfg.mismatch_form, defaults.mismatch_form, from_file.mismatch_form);
            from_file.mismatch_weight =
                pick(cfg.mismatch_weight, defaults.mismatch_weight, from_file.mismatch_weight);
            from_file.alpha = pick(cfg.alpha, defaults.alpha, from_file.alpha);
            from_file.h2_weight = pick(cfg.h2_weight, defaults.h2_weight, from_file.h2_weight);
            from_file.resolution = pick(cfg.resolution, defaults.resolution, from_file.resolution);
            from_file.levels = pick(cfg.levels, defaults.levels, from_file.levels);
            from_file.max_iterations =
                pick(cfg.max_iterations, defaults.max_iterations, from_file.max_iterations);
            from_file.grad_tolerance =
                pick(cfg.grad_tolerance, defaults.grad_tolerance, from_file.grad_tolerance);
            from_file.seed = pick(cfg.seed, defaults.seed, from_file.seed);
            from_file.experiments = pick(cfg.experiments, defaults.experiments, from_file.experiments);
            from_file.template_path =
                pick(cfg.template_path, defaults.template_path, from_file.template_path);
            from_file.scene_path = pick(cfg.scene_path, defaults.scene_path, from_file.scene_path);
            from_file.scene_width = pick(cfg.scene_width, defaults.scene_width, from_file.scene_width);
            from_file.scene_height = pick(cfg.scene_height, defaults.scene_height, from_file.scene_height);
            from_file.pose_x = pick(cfg.pose_x, defaults.pose_x, from_file.pose_x);
            from_file.pose_y = pick(cfg.pose_y, defaults.pose_y, from_file.pose_y);
            from_file.pose_theta = pick(cfg.pose_theta, defaults.pose_theta, from_file.pose_theta);
            from_file.pose_lambda =
                pick(cfg.pose_lambda, defaults.pose_lambda, from_file.pose_lambda);
            from_file.lambda_min = pick(cfg.lambda_min, defaults.lambda_min, from_file.lambda_min);
            from_file.lambda_max = pick(cfg.lambda_max, defaults.lambda_max, from_file.lambda_max);
            cfg = from_file;
        }

        if (reg->parsed()) return cmd_register(cfg);
        if (ver->parsed()) return cmd_verify(cfg);
        if (tpl->parsed()) return cmd_template(cfg);
        if (probe->parsed()) return cmd_psi_probe(matrix, probe_c1, probe_c2, cfg);
        if (gc->parsed()) return cmd_gradcheck(cfg);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUnreadable;
    } catch (const UnknownExperimentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidConfig;
    } catch (const InfeasibleStateError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidConfig;
    } catch (const InvalidInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidConfig;
    }
    return kExitOk;
}
