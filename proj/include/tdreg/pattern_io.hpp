#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "tdreg/atoms.hpp"
#include "tdreg/manifold.hpp"
#include "tdreg/registration.hpp"
#include "tdreg/transforms.hpp"

namespace tdreg {

// Pattern JSON schema: {"atoms": [{"c": ..., "psi": ..., "tau": [x, y], "sigma": [sx, sy]}]}.
// nlohmann::json prints doubles in shortest round-trip form, so save/load is bit-exact.
inline nlohmann::json pattern_to_json(const Pattern& p) {
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& wa : p.atoms) {
        atoms.push_back({{"c", wa.coeff},
                         {"psi", wa.params.psi},
                         {"tau", {wa.params.tau.x, wa.params.tau.y}},
                         {"sigma", {wa.params.sigma.x, wa.params.sigma.y}}});
    }
    return nlohmann::json{{"atoms", atoms}};
}

inline Pattern pattern_from_json(const nlohmann::json& j) {
    if (!j.contains("atoms") || !j["atoms"].is_array())
        throw std::invalid_argument("pattern JSON: missing 'atoms' array");
    Pattern p;
    for (const auto& a : j["atoms"]) {
        const double c = a.at("c").get<double>();
        const double psi = a.at("psi").get<double>();
        const auto& tau = a.at("tau");
        const auto& sigma = a.at("sigma");
        p.atoms.push_back({c, AtomParams(psi, Vec2(tau.at(0).get<double>(), tau.at(1).get<double>()),
                                         Vec2(sigma.at(0).get<double>(), sigma.at(1).get<double>()))});
    }
    return p;
}

inline void save_pattern(const std::string& path, const Pattern& p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_pattern: cannot open '" + path + "'");
    out << pattern_to_json(p).dump(2) << "\n";
}

inline Pattern load_pattern(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_pattern: cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    return pattern_from_json(j);
}

// Model config block: {"kind", "rotation_gain", "scale_gain", "domain": [[lo, hi], ...]}.
inline nlohmann::json model_to_json(const TransformModel& m) {
    nlohmann::json domain = nlohmann::json::array();
    for (int i = 0; i < m.dim(); ++i)
        domain.push_back({m.domain[static_cast<size_t>(i)].lo, m.domain[static_cast<size_t>(i)].hi});
    return nlohmann::json{{"kind", transform_kind_name(m.kind)},
                          {"rotation_gain", m.rotation_gain},
                          {"scale_gain", m.scale_gain},
                          {"domain", domain}};
}

inline TransformModel model_from_json(const nlohmann::json& j) {
    TransformModel m(transform_kind_from_name(j.at("kind").get<std::string>()),
                     j.value("rotation_gain", 0.1 * kPi), j.value("scale_gain", 0.2));
    if (j.contains("domain")) {
        const auto& dom = j["domain"];
        if (static_cast<int>(dom.size()) != m.dim())
            throw std::invalid_argument("model JSON: domain size does not match kind");
        for (int i = 0; i < m.dim(); ++i)
            m.domain[static_cast<size_t>(i)] = {dom.at(static_cast<size_t>(i)).at(0).get<double>(),
                                                dom.at(static_cast<size_t>(i)).at(1).get<double>()};
    }
    return m;
}

inline QuadratureSpec quadrature_from_json(const nlohmann::json& j) {
    QuadratureSpec q;
    q.window = j.value("window", 12.0);
    q.step = j.value("step", 0.05);
    q.boundary_tol = j.value("boundary_tol", 1e-6);
    q.validate();
    return q;
}

inline GridSpec grid_from_json(const nlohmann::json& j) {
    GridSpec g;
    g.points_per_axis = j.value("points_per_axis", 9);
    if (g.points_per_axis < 2) throw std::invalid_argument("grid JSON: points_per_axis must be >= 2");
    return g;
}

// Schedule config: {"kind": "geometric"|"fixed"|"optimal-oracle", "rho1", "alpha",
// "floor", "levels", "rhos": [...]}.
inline FilterSchedule schedule_from_json(const nlohmann::json& j, const ParamVector* lambda_o,
                                         double c1, double nu_e) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "geometric") {
        return make_geometric_schedule(j.at("rho1").get<double>(), j.at("alpha").get<double>(),
                                       j.value("floor", 0.05), j.value("levels", 20));
    }
    if (kind == "fixed") {
        std::vector<double> rhos = j.at("rhos").get<std::vector<double>>();
        return make_fixed_schedule(std::move(rhos));
    }
    if (kind == "optimal-oracle") {
        if (lambda_o == nullptr)
            throw std::invalid_argument("schedule JSON: optimal-oracle requires a lambda_o source");
        return make_oracle_schedule(*lambda_o, c1, nu_e, j.value("levels", 20));
    }
    throw std::invalid_argument("schedule JSON: unknown kind '" + kind + "'");
}

}  // namespace tdreg
