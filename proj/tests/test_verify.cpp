#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "slidereg/verify.hpp"

using namespace slidereg;

namespace {

ExperimentSpec quick(const std::string& id, long samples = 0, int resolution = 17) {
    ExperimentSpec spec;
    spec.id = id;
    spec.samples = samples;
    spec.resolution = resolution;
    return spec;
}

} // namespace

TEST_CASE("fast experiments pass at reduced sample counts") {
    for (const char* id : {"isotropy", "matching", "interchange"}) {
        const Certificate cert = run_experiment(quick(id, 200));
        INFO(id << " margin " << cert.worst_margin);
        CHECK(cert.pass);
    }
    const Certificate coer = run_experiment(quick("coercivity", 1500));
    CHECK(coer.pass);
    CHECK(coer.details["fluid_fails_as_required"].get<bool>());

    const Certificate jens = run_experiment(quick("jensen-scaling", 150));
    CHECK(jens.pass);
    CHECK(jens.details["near_equality_samples"].get<long>() > 0);

    const Certificate grad = run_experiment(quick("gradcheck", 25));
    CHECK(grad.pass);
    CHECK(grad.worst_margin <= 1e-5);
}

TEST_CASE("shear non-stationarity certificate") {
    const Certificate cert = run_experiment(quick("shear-nonstationarity"));
    CHECK(cert.pass);
    CHECK(cert.worst_margin >= kShearGradientThreshold);
    CHECK(cert.details["fluid_gradient_inf_norm"].get<double>() <= 1e-8);
}

TEST_CASE("solver experiments pass at reduced resolution") {
    const Certificate scaling = run_experiment(quick("scaling-recovery", 0, 17));
    INFO(scaling.details.dump(2));
    CHECK(scaling.pass);

    const Certificate rigid = run_experiment(quick("rigid-recovery", 0, 17));
    INFO(rigid.details.dump(2));
    CHECK(rigid.pass);

    const Certificate fluid = run_experiment(quick("fluid-degeneracy", 0, 17));
    INFO(fluid.details.dump(2));
    CHECK(fluid.pass);
    CHECK(fluid.worst_margin >= 1e-2); // maps genuinely differ

    const Certificate h2 = run_experiment(quick("second-gradient-recovery", 0, 17));
    INFO(h2.details.dump(2));
    CHECK(h2.pass);
    CHECK(h2.exploratory);
}

TEST_CASE("certificates are deterministic given the seed") {
    for (const char* id : {"isotropy", "coercivity", "jensen-scaling"}) {
        const Certificate a = run_experiment(quick(id, 100));
        const Certificate b = run_experiment(quick(id, 100));
        CHECK(a.to_json().dump() == b.to_json().dump());
    }
    // different seed, different stream
    ExperimentSpec spec = quick("isotropy", 100);
    const std::string base = run_experiment(spec).to_json().dump();
    spec.seed += 1;
    CHECK(run_experiment(spec).to_json().dump() != base);
}

TEST_CASE("tolerance override to zero forces a failure") {
    ExperimentSpec spec = quick("isotropy", 50);
    spec.tolerance = 0.0;
    const Certificate cert = run_experiment(spec);
    CHECK_FALSE(cert.pass);
}

TEST_CASE("unknown experiment id") {
    CHECK_THROWS_AS(run_experiment(quick("mystery")), UnknownExperimentError);
}

TEST_CASE("artifacts are written when a directory is given") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "slidereg_verify_artifacts";
    fs::remove_all(dir);
    ExperimentSpec spec = quick("isotropy", 50);
    spec.artifact_dir = dir.string();
    const Certificate cert = run_experiment(spec);
    CHECK(cert.pass);
    CHECK(fs::exists(dir / "isotropy" / "certificate.json"));
}
