#pragma once

// Command-line front end. Exit codes: 0 success, 1 runtime or validation
// failure, 2 usage error. Diagnostics go to the error stream.

#include <cstdint>
#include <exception>
#include <ostream>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dfget/displacement.hpp"
#include "dfget/gcm.hpp"
#include "dfget/io.hpp"
#include "dfget/metrics.hpp"
#include "dfget/synth.hpp"
#include "dfget/verify.hpp"

namespace dfget {

inline nlohmann::json metrics_json(const MetricsReport& rep) {
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& o : rep.match.gt_objects) {
        objs.push_back({{"gt_id", o.id},
                        {"area", o.area},
                        {"detected_by", o.detected_by ? nlohmann::json(*o.detected_by) : nlohmann::json()},
                        {"counterpart", o.counterpart ? nlohmann::json(*o.counterpart) : nlohmann::json()},
                        {"overlap", o.overlap},
                        {"dice", o.dice},
                        {"hausdorff", o.hausdorff}});
    }
    return {{"obj_f1", rep.obj_f1},
            {"obj_dice", rep.obj_dice},
            {"obj_hd", rep.obj_hd},
            {"tp", rep.match.tp},
            {"fp", rep.match.fp},
            {"fn", rep.match.fn},
            {"per_object", objs}};
}

/// "square:K" or "disk:R".
inline NeighborhoodSpec parse_stencil(const std::string& text) {
    static const std::regex re("(square|disk):([0-9]+)");
    std::smatch m;
    if (!std::regex_match(text, m, re))
        throw std::invalid_argument("stencil must look like square:K or disk:R, got '" + text + "'");
    const int v = std::stoi(m[2]);
    return m[1] == "square" ? NeighborhoodSpec::square(v) : NeighborhoodSpec::disk(v);
}

struct CheckSummary {
    int seeds = 0;
    int anisotropic_separated = 0;
    double max_isotropic_gap = 0.0;
    std::vector<JacobianReport> jacobians;
    bool passed = false;
};

/// Isomorphism probe over `seeds` seeds plus Jacobian checks of diffusivity,
/// getconv and getblock at `points` random points each. A supplied layer
/// replaces the random layer parameters of the layer checks.
inline CheckSummary run_getconv_check(int seeds, int points, double tolerance,
                                      const std::optional<LayerParams>& layer,
                                      NeighborhoodSpec spec = NeighborhoodSpec::square(3)) {
    CheckSummary sum;
    sum.seeds = seeds;
    for (int s = 0; s < seeds; ++s) {
        const ProbeReport r = isomorphism_probe(static_cast<std::uint64_t>(s));
        if (r.anisotropic_gap > 1e-6) ++sum.anisotropic_separated;
        sum.max_isotropic_gap = std::max(sum.max_isotropic_gap, r.isotropic_gap);
    }
    const std::size_t channels = layer ? layer->channels() : 4;
    for (CheckedOp op : {CheckedOp::diffusivity, CheckedOp::getconv, CheckedOp::getblock}) {
        for (int p = 0; p < points; ++p) {
            JacobianPoint pt = random_jacobian_point(op, 1000 + static_cast<std::uint64_t>(p), {4, 4},
                                                     channels, spec);
            if (layer) pt.layer = *layer;
            sum.jacobians.push_back(jacobian_check(op, pt, tolerance));
        }
    }
    const bool iso_ok = sum.max_isotropic_gap == 0.0;
    const bool aniso_ok = 100 * sum.anisotropic_separated >= 99 * seeds;
    const bool jac_ok = std::all_of(sum.jacobians.begin(), sum.jacobians.end(),
                                    [](const JacobianReport& r) { return r.passed; });
    sum.passed = iso_ok && aniso_ok && jac_ok;
    return sum;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Displacement-field graph clustering and anisotropic transmitter tools", "dfget"};
    app.require_subcommand(1);

    std::string labels_path, field_path, out_path, energy_path, pred_path, gt_path, params_path;
    std::string fixture, stencil_text = "square:3";
    int radius = 5, iters = 96, t0 = 2, t1 = 8, height = 64, width = 64, grid_k = 9;
    int seeds = 100, points = 5;
    double tolerance = 1e-4;
    std::uint64_t seed = 0;

    auto* gen = app.add_subcommand("gen-df", "Ground-truth displacement field from a label map");
    gen->add_option("--labels", labels_path, "Label map (P5 PGM)")->required();
    gen->add_option("--out", out_path, "Field payload path; sidecar written to <out>.json")->required();
    gen->add_option("--radius", radius, "Disk neighborhood radius")->capture_default_str();
    gen->add_option("--iters", iters, "Averaging iterations")->capture_default_str();

    auto* cluster = app.add_subcommand("cluster", "Instance map from an energy map and a displacement field");
    cluster->add_option("--energy", energy_path, "Energy map (P5 PGM)")->required();
    cluster->add_option("--field", field_path, "Field payload path")->required();
    cluster->add_option("--out", out_path, "Instance map output (P5 PGM)")->required();
    cluster->add_option("--t0", t0, "Contraction rounds")->capture_default_str();
    cluster->add_option("--t1", t1, "Recovery rounds")->capture_default_str();

    auto* eval = app.add_subcommand("eval", "Object-level metrics as JSON on standard output");
    eval->add_option("--pred", pred_path, "Predicted instance map (P5 PGM)")->required();
    eval->add_option("--gt", gt_path, "Ground-truth instance map (P5 PGM)")->required();

    auto* check = app.add_subcommand("getconv-check", "Isomorphism probe and Jacobian checks");
    check->add_option("--seeds", seeds, "Probe seeds")->capture_default_str();
    check->add_option("--points", points, "Random points per Jacobian check")->capture_default_str();
    check->add_option("--tolerance", tolerance, "Max relative Jacobian error")->capture_default_str();
    check->add_option("--params", params_path, "Layer parameter manifest (JSON)");
    check->add_option("--stencil", stencil_text, "square:K or disk:R")->capture_default_str();

    auto* syn = app.add_subcommand("synth", "Write a synthetic label fixture");
    syn->add_option("--fixture", fixture, "Fixture name")->required();
    syn->add_option("--height", height, "Grid height")->capture_default_str();
    syn->add_option("--width", width, "Grid width")->capture_default_str();
    syn->add_option("--seed", seed, "Seed for random fixtures")->capture_default_str();
    syn->add_option("--k", grid_k, "Instance count for grid-of-k-instances")->capture_default_str();
    syn->add_option("--out", out_path, "Output label map (P5 PGM)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            const LabelMap labels = read_map(labels_path);
            write_field(out_path, gt_displacement(labels, {radius, iters}));
        } else if (cluster->parsed()) {
            const LabelMap energy_map = read_map(energy_path);
            const DisplacementField f = read_field(field_path);
            EnergyMap e(energy_map.shape);
            for (NodeId i = 0; i < e.size(); ++i) e[i] = static_cast<double>(energy_map[i]);
            write_map(out_path, gcm(f, e, {t0, t1}));
        } else if (eval->parsed()) {
            const MetricsReport rep = evaluate(read_map(pred_path), read_map(gt_path));
            out << metrics_json(rep).dump(2) << "\n";
        } else if (check->parsed()) {
            const NeighborhoodSpec spec = parse_stencil(stencil_text);
            std::optional<LayerParams> layer;
            if (!params_path.empty()) layer = read_params(params_path);
            const CheckSummary sum = run_getconv_check(seeds, points, tolerance, layer, spec);
            nlohmann::json jac = nlohmann::json::array();
            for (const auto& r : sum.jacobians)
                jac.push_back({{"op", to_string(r.op)},
                               {"max_rel_error", r.max_rel_error},
                               {"passed", r.passed},
                               {"diagnostic", r.diagnostic}});
            out << nlohmann::json{{"probe_seeds", sum.seeds},
                                  {"anisotropic_separated", sum.anisotropic_separated},
                                  {"max_isotropic_gap", sum.max_isotropic_gap},
                                  {"jacobian", jac},
                                  {"passed", sum.passed}}
                       .dump(2)
                << "\n";
            if (!sum.passed) {
                err << "getconv-check failed\n";
                return 1;
            }
        } else if (syn->parsed()) {
            write_map(out_path, synth(fixture, GridShape(height, width), seed, grid_k));
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace dfget
