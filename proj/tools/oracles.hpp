#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hencky::cli {

/// Names accepted by `oracle`.
const std::vector<std::string>& oracle_names();

/// Brute-force values with their inputs. Throws std::invalid_argument for an unknown name.
nlohmann::json run_oracle(const std::string& name, unsigned seed, int m);

}  // namespace hencky::cli
