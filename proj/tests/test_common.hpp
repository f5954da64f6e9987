#pragma once

#include <filesystem>
#include <string>

#include "fluidmc/parser.hpp"

#ifndef FLUIDMC_MODELS_DIR
#define FLUIDMC_MODELS_DIR "models"
#endif

namespace fluidmc::test {

inline std::filesystem::path models_dir() { return FLUIDMC_MODELS_DIR; }

inline PopulationModel model(const std::string& name) { return load_model(models_dir() / (name + ".fmc")); }

// Two agent states flipping at rates k1 (on -> off) and k2 (off -> on).
inline PopulationModel flip_model(double k1, double k2) {
  return parse_model("model flip\nstates on, off\nparam k1 = " + std::to_string(k1) +
                     "\nparam k2 = " + std::to_string(k2) +
                     "\ntransition off_t { rule on -> off; rate k1 * x_on }\n"
                     "transition on_t { rule off -> on; rate k2 * x_off }\n"
                     "init x_on = 1.0\nlabel at_on = { on }\nlabel at_off = { off }\n"
                     "reward occ { state on = 1.0 }\nreward flips { trans off_t = 1.0 }\n");
}

}  // namespace fluidmc::test
