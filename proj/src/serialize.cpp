#include "distq/serialize.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace distq {

std::string format_double(double v) {
    char buf[40];
    // round-trip: try the short forms first, fall back to 17 digits
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

nlohmann::json mdp_to_json(const TabularMdp& mdp) {
    nlohmann::json t = nlohmann::json::array();
    for (int x = 0; x < mdp.n_states; ++x) {
        nlohmann::json row_x = nlohmann::json::array();
        for (int a = 0; a < mdp.n_actions; ++a) {
            nlohmann::json row_a = nlohmann::json::array();
            for (int y = 0; y < mdp.n_states; ++y) row_a.push_back(mdp.p(x, a, y));
            row_x.push_back(std::move(row_a));
        }
        t.push_back(std::move(row_x));
    }
    nlohmann::json r = nlohmann::json::array();
    for (int x = 0; x < mdp.n_states; ++x) {
        nlohmann::json row = nlohmann::json::array();
        for (int a = 0; a < mdp.n_actions; ++a) row.push_back(mdp.r(x, a));
        r.push_back(std::move(row));
    }
    return nlohmann::json{{"n_states", mdp.n_states},
                          {"n_actions", mdp.n_actions},
                          {"gamma", mdp.gamma},
                          {"transition", std::move(t)},
                          {"reward", std::move(r)}};
}

TabularMdp mdp_from_json(const nlohmann::json& j) {
    TabularMdp mdp;
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    mdp.gamma = j.at("gamma").get<double>();
    mdp.transition.reserve(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions *
                           mdp.n_states);
    mdp.reward.reserve(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions);
    for (const auto& row_x : j.at("transition"))
        for (const auto& row_a : row_x)
            for (const auto& v : row_a) mdp.transition.push_back(v.get<double>());
    for (const auto& row : j.at("reward"))
        for (const auto& v : row) mdp.reward.push_back(v.get<double>());
    mdp.validate();
    return mdp;
}

void save_mdp(const TabularMdp& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_mdp: cannot open " + path);
    out << mdp_to_json(mdp).dump(2) << "\n";
}

TabularMdp load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_mdp: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return mdp_from_json(j);
}

nlohmann::json measure_to_json(const SignedMeasure& mu) {
    return nlohmann::json(mu.masses());
}

std::string return_function_to_csv(const ReturnFunction& rf) {
    std::ostringstream out;
    out << "# distq return-function csv v1\n";
    out << "state,action,atom_index,atom,mass\n";
    const AtomGrid& g = rf.grid();
    for (int x = 0; x < rf.n_states(); ++x)
        for (int a = 0; a < rf.n_actions(); ++a)
            for (std::size_t i = 0; i < g.size(); ++i)
                out << x << ',' << a << ',' << i << ',' << format_double(g[i]) << ','
                    << format_double(rf.at(x, a).masses()[i]) << '\n';
    return out.str();
}

ReturnFunction return_function_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    struct Row {
        int x, a;
        std::size_t i;
        double atom, mass;
    };
    std::vector<Row> rows;
    int max_x = -1, max_a = -1;
    std::size_t max_i = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("state,", 0) == 0) continue;
        Row r{};
        char* p = line.data();
        r.x = static_cast<int>(std::strtol(p, &p, 10));
        r.a = static_cast<int>(std::strtol(p + 1, &p, 10));
        r.i = static_cast<std::size_t>(std::strtol(p + 1, &p, 10));
        r.atom = std::strtod(p + 1, &p);
        r.mass = std::strtod(p + 1, &p);
        max_x = std::max(max_x, r.x);
        max_a = std::max(max_a, r.a);
        max_i = std::max(max_i, r.i);
        rows.push_back(r);
    }
    if (rows.empty()) throw std::invalid_argument("return_function_from_csv: no rows");
    std::vector<double> atoms(max_i + 1);
    for (const auto& r : rows)
        if (r.x == 0 && r.a == 0) atoms[r.i] = r.atom;
    auto grid = std::make_shared<const AtomGrid>(std::move(atoms));
    ReturnFunction rf(grid, max_x + 1, max_a + 1);
    for (const auto& r : rows) rf.at(r.x, r.a).masses()[r.i] = r.mass;
    return rf;
}

nlohmann::json return_function_to_json(const ReturnFunction& rf) {
    nlohmann::json entries = nlohmann::json::array();
    for (int x = 0; x < rf.n_states(); ++x)
        for (int a = 0; a < rf.n_actions(); ++a)
            entries.push_back(nlohmann::json{
                {"state", x}, {"action", a}, {"masses", measure_to_json(rf.at(x, a))}});
    return nlohmann::json{{"atoms", rf.grid().atoms()},
                          {"n_states", rf.n_states()},
                          {"n_actions", rf.n_actions()},
                          {"entries", std::move(entries)}};
}

ReturnFunction return_function_from_json(const nlohmann::json& j) {
    auto grid = std::make_shared<const AtomGrid>(
        j.at("atoms").get<std::vector<double>>());
    ReturnFunction rf(grid, j.at("n_states").get<int>(), j.at("n_actions").get<int>());
    for (const auto& e : j.at("entries")) {
        auto masses = e.at("masses").get<std::vector<double>>();
        rf.at(e.at("state").get<int>(), e.at("action").get<int>()) =
            SignedMeasure(grid, std::move(masses));
    }
    return rf;
}

} // namespace distq
