#include "robust_merton/spec_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "robust_merton/errors.hpp"

namespace robust_merton {

namespace {

using nlohmann::json;

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
    throw ParseError("field '" + path + "': " + what);
}

void reject_unknown(const json& object, const std::string& path, const std::set<std::string>& allowed) {
    if (!object.is_object()) field_error(path, "expected an object");
    for (const auto& [key, value] : object.items()) {
        if (!allowed.count(key)) field_error(path.empty() ? key : path + "." + key, "unknown field");
    }
}

const json& require(const json& object, const std::string& key, const std::string& path) {
    auto it = object.find(key);
    if (it == object.end()) field_error(path.empty() ? key : path + "." + key, "missing");
    return *it;
}

double number(const json& value, const std::string& path) {
    if (!value.is_number()) field_error(path, "expected a number");
    return value.get<double>();
}

Vector vector_field(const json& value, const std::string& path) {
    if (value.is_number()) return Vector::Constant(1, value.get<double>());
    if (!value.is_array() || value.empty()) field_error(path, "expected a number or a non-empty array");
    Vector out(static_cast<Eigen::Index>(value.size()));
    for (std::size_t i = 0; i < value.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = number(value[i], path + "[" + std::to_string(i) + "]");
    }
    return out;
}

Matrix covariance_field(const json& value, Eigen::Index d, const std::string& path) {
    const Vector entries = vector_field(value, path);
    if (entries.size() != d * (d + 1) / 2) {
        field_error(path, "expected " + std::to_string(d * (d + 1) / 2) +
                              " lower-triangular entries (row-major)");
    }
    Matrix cov(d, d);
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = 0; c <= r; ++c) {
            cov(r, c) = cov(c, r) = entries[k++];
        }
    }
    return cov;
}

LevyTriplet vertex_field(const json& value, const std::string& path) {
    reject_unknown(value, path, {"drift", "covariance", "atoms"});
    const Vector drift = vector_field(require(value, "drift", path), path + ".drift");
    const Matrix cov = covariance_field(require(value, "covariance", path), drift.size(), path + ".covariance");
    std::vector<JumpAtom> atoms;
    if (auto it = value.find("atoms"); it != value.end()) {
        if (!it->is_array()) field_error(path + ".atoms", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string atom_path = path + ".atoms[" + std::to_string(i) + "]";
            const json& atom = (*it)[i];
            reject_unknown(atom, atom_path, {"z", "w"});
            atoms.push_back({vector_field(require(atom, "z", atom_path), atom_path + ".z"),
                             number(require(atom, "w", atom_path), atom_path + ".w")});
        }
    }
    try {
        return LevyTriplet(drift, cov, DiscreteLevyMeasure(std::move(atoms)));
    } catch (const ValidationError& e) {
        field_error(path, e.what());
    }
}

UtilitySpec utility_field(const json& value) {
    const std::string path = "utility";
    reject_unknown(value, path, {"family", "p", "a"});
    const json& family = require(value, "family", path);
    if (!family.is_string()) field_error("utility.family", "expected a string");
    const auto name = family.get<std::string>();
    try {
        if (name == "crra-log") {
            if (value.contains("p") || value.contains("a")) field_error(path, "crra-log takes no parameters");
            return UtilitySpec::crra_log();
        }
        if (name == "crra-power") {
            if (value.contains("a")) field_error("utility.a", "not a crra-power parameter");
            return UtilitySpec::crra_power(number(require(value, "p", path), "utility.p"));
        }
        if (name == "cara") {
            if (value.contains("p")) field_error("utility.p", "not a cara parameter");
            return UtilitySpec::cara(number(require(value, "a", path), "utility.a"));
        }
    } catch (const ValidationError& e) {
        field_error(path, e.what());
    }
    field_error("utility.family", "expected crra-log, crra-power or cara");
}

std::string location_message(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

json vector_json(const Vector& v) {
    if (v.size() == 1) return v[0];
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

}  // namespace

MarketSpec parse_market_spec(std::string_view text) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
        throw ParseError(location_message(text, byte) + ": malformed JSON");
    }
    reject_unknown(root, "", {"horizon", "grid_step", "epsilon", "w0", "utility", "segments"});
    const double horizon = number(require(root, "horizon", ""), "horizon");
    const double step = number(require(root, "grid_step", ""), "grid_step");
    const double epsilon = root.contains("epsilon") ? number(root["epsilon"], "epsilon") : 2.0;
    const double w0 = number(require(root, "w0", ""), "w0");
    const UtilitySpec utility = utility_field(require(root, "utility", ""));

    const json& segments = require(root, "segments", "");
    if (!segments.is_array() || segments.empty()) field_error("segments", "expected a non-empty array");
    std::vector<double> breakpoints{0.0};
    std::vector<ConfidenceSet> sets;
    for (std::size_t k = 0; k < segments.size(); ++k) {
        const std::string path = "segments[" + std::to_string(k) + "]";
        const json& seg = segments[k];
        reject_unknown(seg, path, {"end", "bound", "vertices"});
        breakpoints.push_back(number(require(seg, "end", path), path + ".end"));
        const json& vertices = require(seg, "vertices", path);
        if (!vertices.is_array() || vertices.empty()) field_error(path + ".vertices", "expected a non-empty array");
        std::vector<LevyTriplet> triplets;
        for (std::size_t v = 0; v < vertices.size(); ++v) {
            triplets.push_back(vertex_field(vertices[v], path + ".vertices[" + std::to_string(v) + "]"));
        }
        double bound;
        if (seg.contains("bound")) {
            bound = number(seg["bound"], path + ".bound");
        } else {
            if (!(epsilon > 0.0 && epsilon <= 2.0)) field_error("epsilon", "must lie in (0, 2]");
            bound = ConfidenceSet::minimal_bound(triplets, epsilon);
        }
        try {
            sets.emplace_back(std::move(triplets), bound);
        } catch (const ValidationError& e) {
            field_error(path, e.what());
        }
    }
    if (std::abs(breakpoints.back() - horizon) > 1e-12 * std::max(1.0, horizon)) {
        field_error("horizon", "must equal the end of the last segment");
    }
    breakpoints.back() = horizon;
    MarketSpec spec{TimeGrid(std::move(breakpoints), step), std::move(sets), utility, w0, epsilon};
    spec.validate();
    return spec;
}

MarketSpec load_market_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read spec file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_market_spec(buffer.str());
}

std::string market_spec_to_json(const MarketSpec& spec) {
    json root;
    root["horizon"] = spec.grid.horizon();
    root["grid_step"] = spec.grid.step();
    root["epsilon"] = spec.epsilon;
    root["w0"] = spec.initial_wealth;
    json utility{{"family", spec.utility.name()}};
    if (spec.utility.family() == UtilityFamily::CrraPower) utility["p"] = spec.utility.p();
    if (spec.utility.family() == UtilityFamily::Cara) utility["a"] = spec.utility.a();
    root["utility"] = utility;
    json segments = json::array();
    for (std::size_t k = 0; k < spec.sets.size(); ++k) {
        json seg;
        seg["end"] = spec.grid.breakpoints()[k + 1];
        seg["bound"] = spec.sets[k].bound();
        json vertices = json::array();
        for (const auto& v : spec.sets[k].vertices()) {
            json vertex;
            vertex["drift"] = vector_json(v.drift());
            json cov = json::array();
            for (Eigen::Index r = 0; r < v.dimension(); ++r) {
                for (Eigen::Index c = 0; c <= r; ++c) cov.push_back(v.covariance()(r, c));
            }
            vertex["covariance"] = v.dimension() == 1 ? json(v.covariance()(0, 0)) : cov;
            json atoms = json::array();
            for (const auto& atom : v.jumps().atoms()) {
                atoms.push_back({{"z", vector_json(atom.location)}, {"w", atom.intensity}});
            }
            vertex["atoms"] = atoms;
            vertices.push_back(vertex);
        }
        seg["vertices"] = vertices;
        segments.push_back(seg);
    }
    root["segments"] = segments;
    return root.dump(2);
}

}  // namespace robust_merton
