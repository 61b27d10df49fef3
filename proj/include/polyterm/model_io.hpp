#pragma once

// Model files. Coefficients are decimal strings (or "p/q"), lowest degree
// first, so constraint checks see the exact values that were written.
//
//   {"kind": "rate", "n": 2, "a": ["0.005", "-0.1"], "b2": ["0", "0", "0", "1"],
//    "R": ["0", "1"], "domain": ["0", "inf"]}
//   {"kind": "vol", "N": 100, "nmap": [1, 2, ...], "h2": [...], "b2": [...],
//    "bh": [...], "a": [...], "domain": ["0", "0.05"]}
//   {"family": "rate-family-2", "alpha": "0.1", "beta": "0.05"}

#include "polyterm/errors.hpp"
#include "polyterm/model.hpp"
#include "polyterm/rational.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace polyterm {

using Json = nlohmann::ordered_json;

namespace detail {

inline Rational json_rational(const Json& v, const std::string& field) {
    if (v.is_string()) {
        try {
            return parse_decimal(v.get<std::string>());
        } catch (const ParamError& e) {
            throw SchemaError("field '" + field + "': " + e.what());
        }
    }
    if (v.is_number_integer()) return Rational(v.get<long long>());
    throw SchemaError("field '" + field + "' must be a decimal string (binary floats are not exact)");
}

inline const Json& json_field(const Json& obj, const std::string& field) {
    auto it = obj.find(field);
    if (it == obj.end()) throw SchemaError("missing field '" + field + "'");
    return *it;
}

inline int json_int(const Json& obj, const std::string& field) {
    const Json& v = json_field(obj, field);
    if (!v.is_number_integer()) throw SchemaError("field '" + field + "' must be an integer");
    return v.get<int>();
}

inline RationalPoly json_poly(const Json& obj, const std::string& field, int max_degree) {
    const Json& v = json_field(obj, field);
    if (!v.is_array()) throw SchemaError("field '" + field + "' must be an array of coefficients");
    std::vector<Rational> c;
    for (std::size_t i = 0; i < v.size(); ++i) c.push_back(json_rational(v[i], field + "[" + std::to_string(i) + "]"));
    RationalPoly p(std::move(c));
    if (p.degree() > max_degree)
        throw SchemaError("field '" + field + "' has degree " + std::to_string(p.degree()) +
                          "; polynomial models allow at most degree " + std::to_string(max_degree));
    return p;
}

inline Interval json_domain(const Json& obj) {
    const Json& v = json_field(obj, "domain");
    if (!v.is_array() || v.size() != 2) throw SchemaError("field 'domain' must be [lo, hi]");
    auto bound = [&](std::size_t k, const char* inf) -> std::optional<Rational> {
        if (v[k].is_string() && v[k].get<std::string>() == inf) return std::nullopt;
        return json_rational(v[k], "domain[" + std::to_string(k) + "]");
    };
    Interval d{bound(0, "-inf"), bound(1, "inf")};
    if (d.lo && d.hi && !(*d.lo < *d.hi)) throw SchemaError("field 'domain' must satisfy lo < hi");
    return d;
}

inline Json poly_json(const RationalPoly& p) {
    Json out = Json::array();
    for (const auto& c : p.coeffs()) out.push_back(to_decimal_string(c));
    return out;
}

inline Json domain_json(const Interval& d) {
    return Json::array({d.lo ? to_decimal_string(*d.lo) : "-inf", d.hi ? to_decimal_string(*d.hi) : "inf"});
}

inline std::string label_of(const Json& j) {
    auto it = j.find("label");
    return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

} // namespace detail

/// Builds a spec from parsed JSON.
inline ModelSpec model_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("model file must contain a JSON object");
    if (j.contains("family")) {
        const Json& name = j["family"];
        if (!name.is_string()) throw SchemaError("field 'family' must be a string");
        FamilyParams params;
        for (const auto& [key, value] : j.items()) {
            if (key == "family" || key == "label") continue;
            params[key] = detail::json_rational(value, key);
        }
        ModelSpec spec = build_family(name.get<std::string>(), params);
        if (auto lbl = detail::label_of(j); !lbl.empty()) std::visit([&](auto& s) { s.label = lbl; }, spec);
        return spec;
    }
    const std::string kind = j.contains("kind") && j["kind"].is_string() ? j["kind"].get<std::string>() : "";
    if (kind == "rate") {
        RateModelSpec s;
        s.n = detail::json_int(j, "n");
        if (s.n < 1) throw SchemaError("field 'n' must be positive");
        s.a = detail::json_poly(j, "a", 3);
        s.b2 = detail::json_poly(j, "b2", 4);
        s.R = detail::json_poly(j, "R", 2);
        s.domain = detail::json_domain(j);
        s.label = detail::label_of(j);
        return s;
    }
    if (kind == "vol") {
        VolModelSpec s;
        s.N = detail::json_int(j, "N");
        if (s.N < 2) throw SchemaError("field 'N' must be at least 2");
        const Json& nm = detail::json_field(j, "nmap");
        if (!nm.is_array() || nm.size() != static_cast<std::size_t>(s.N - 1))
            throw SchemaError("field 'nmap' must list N-1 non-negative integers");
        for (const auto& v : nm) {
            if (!v.is_number_integer() || v.get<long long>() < 0)
                throw SchemaError("field 'nmap' must list N-1 non-negative integers");
            s.nmap.push_back(v.get<int>());
        }
        s.h2 = detail::json_poly(j, "h2", 2);
        s.b2 = detail::json_poly(j, "b2", 4);
        s.bh = detail::json_poly(j, "bh", 3);
        s.a = detail::json_poly(j, "a", 3);
        s.domain = detail::json_domain(j);
        s.label = detail::label_of(j);
        return s;
    }
    throw SchemaError("model needs \"kind\": \"rate\" | \"vol\" or a \"family\" shortcut");
}

inline Json model_to_json(const RateModelSpec& s) {
    Json j;
    j["kind"] = "rate";
    if (!s.label.empty()) j["label"] = s.label;
    j["n"] = s.n;
    j["a"] = detail::poly_json(s.a);
    j["b2"] = detail::poly_json(s.b2);
    j["R"] = detail::poly_json(s.R);
    j["domain"] = detail::domain_json(s.domain);
    return j;
}

inline Json model_to_json(const VolModelSpec& s) {
    Json j;
    j["kind"] = "vol";
    if (!s.label.empty()) j["label"] = s.label;
    j["N"] = s.N;
    j["nmap"] = s.nmap;
    j["h2"] = detail::poly_json(s.h2);
    j["b2"] = detail::poly_json(s.b2);
    j["bh"] = detail::poly_json(s.bh);
    j["a"] = detail::poly_json(s.a);
    j["domain"] = detail::domain_json(s.domain);
    return j;
}

inline Json model_to_json(const ModelSpec& s) {
    return std::visit([](const auto& v) { return model_to_json(v); }, s);
}

/// Parses model text. Syntax errors report line and column.
inline ModelSpec parse_model(const std::string& text, const std::string& source = "<string>") {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
            if (text[k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw SchemaError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": invalid JSON");
    }
    try {
        return model_from_json(j);
    } catch (const SchemaError& e) {
        throw SchemaError(source + ": " + e.what());
    }
}

inline ModelSpec load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_model(buf.str(), path);
}

inline void save_model(const ModelSpec& spec, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write model file '" + path + "'");
    out << model_to_json(spec).dump(2) << "\n";
}

} // namespace polyterm
