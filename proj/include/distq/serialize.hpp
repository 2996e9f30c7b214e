#pragma once

#include <string>

#include <json.hpp>

#include "distq/grid.hpp"
#include "distq/mdp.hpp"

namespace distq {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

nlohmann::json mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const nlohmann::json& j);
void save_mdp(const TabularMdp& mdp, const std::string& path);
TabularMdp load_mdp(const std::string& path);

/// JSON array of atom masses.
nlohmann::json measure_to_json(const SignedMeasure& mu);

/// CSV rows `state,action,atom_index,atom,mass` for the whole table,
/// preceded by a schema comment and a column header. Values round-trip
/// bit-exactly within one implementation.
std::string return_function_to_csv(const ReturnFunction& rf);
ReturnFunction return_function_from_csv(const std::string& csv);

nlohmann::json return_function_to_json(const ReturnFunction& rf);
ReturnFunction return_function_from_json(const nlohmann::json& j);

} // namespace distq
