#pragma once

// JSON documents for finite instances and classes.
//
// Function values may be written as a number (scalar output) or an array.
//
//   finite instance
//     { "weights": [..], "features": [[..], ..] (optional),
//       "representations": [[feature id per support point], ..],
//       "source_functions": [[value per feature], ..],
//       "target_functions": [[value per feature], ..],
//       "sources": [..], "target_true": i, "true_rep": i }
//
//   finite class
//     { "domain": ["a", "b", ..], "function_names": [..] (optional),
//       "values": [[value per domain point], ..] }
//
// Hard instances are written as a finite instance over the candidate class
// plus a "construction" block describing the gadget.

#include "divlab/diversity.hpp"
#include "divlab/eluder.hpp"
#include "divlab/hardness.hpp"

#include <filesystem>
#include <string>

namespace divlab {

FiniteInstance parse_instance(const std::string& text);
FiniteInstance load_instance(const std::filesystem::path& path);
std::string instance_to_json(const FiniteInstance& inst);

FiniteClass parse_class(const std::string& text);
FiniteClass load_class(const std::filesystem::path& path);
std::string class_to_json(const FiniteClass& F);

std::string hard_instance_to_json(const HardInstance& inst);

// Reads a whole file; ContractError naming the path when it cannot.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace divlab
