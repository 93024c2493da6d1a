#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "slidereg/errors.hpp"
#include "slidereg/mesh.hpp"
#include "slidereg/solver.hpp"

namespace slidereg {

using Json = nlohmann::json;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << content;
    if (!out) throw IoError(path + ": write failed");
}

inline Json solve_report_to_json(const SolveReport& rep) {
    Json j;
    j["termination"] = rep.termination;
    j["iterations"] = rep.iterations;
    j["initial_energy"] = rep.initial_energy;
    j["final_energy"] = rep.final_energy;
    j["initial_grad_norm"] = rep.initial_grad_norm;
    j["final_grad_norm"] = rep.final_grad_norm;
    j["min_det"] = rep.feasibility.min_det;
    j["boundary_monotone"] = rep.feasibility.monotone;
    j["nodal_images_in_domain"] = rep.feasibility.contained;
    if (rep.recovery_max_deviation >= 0.0)
        j["recovery_max_deviation"] = rep.recovery_max_deviation;
    if (!rep.landmark_snap_distances.empty())
        j["landmark_snap_distances"] = rep.landmark_snap_distances;
    return j;
}

/// iteration,total,elastic,mismatch,second_gradient,min_det,step_length
inline std::string trace_to_csv(const std::vector<TraceRow>& trace) {
    std::string out = "iteration,total,elastic,mismatch,second_gradient,min_det,step_length\n";
    for (const TraceRow& r : trace) {
        out += std::to_string(r.iteration);
        for (double v : {r.total, r.elastic, r.mismatch, r.second_gradient, r.min_det,
                         r.step_length})
            out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

/// One row per node: reference x,y; image x,y; boundary flag; chart coordinate
/// (empty for interior nodes).
inline std::string deformation_to_csv(const TriMesh& mesh, const BoundaryChart& chart,
                                      const DeformationState& state) {
    const std::vector<Vec2> pos = realize_positions(mesh, chart, state);
    std::string out = "ref_x,ref_y,img_x,img_y,boundary,chart_t\n";
    for (int n = 0; n < mesh.node_count(); ++n) {
        const Vec2 r = mesh.nodes[static_cast<std::size_t>(n)];
        const Vec2 p = pos[static_cast<std::size_t>(n)];
        const int bslot = mesh.boundary_index[static_cast<std::size_t>(n)];
        out += format_double(r.x) + "," + format_double(r.y) + "," + format_double(p.x) + "," +
               format_double(p.y) + ",";
        if (bslot >= 0)
            out += "1," + format_double(chart.wrap(state.boundary_t[static_cast<std::size_t>(bslot)]));
        else
            out += "0,";
        out += "\n";
    }
    return out;
}

} // namespace slidereg
