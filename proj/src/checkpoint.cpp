#include <json.hpp>

#include "drisk/error.hpp"
#include "drisk/samplers.hpp"

namespace drisk {

std::string ChainCheckpoint::to_json() const {
  nlohmann::json j;
  j["format"] = "drisk-checkpoint";
  j["version"] = kFormatVersion;
  j["chain"] = chain;
  j["iterations_done"] = iterations_done;
  j["epsilon"] = epsilon;
  j["state"] = {{"beta", state.beta},
                {"allocation", state.allocation},
                {"cluster_effects", state.cluster_effects},
                {"mass", state.mass}};
  j["rng_state"] = rng_state;
  return j.dump(1);
}

ChainCheckpoint ChainCheckpoint::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "drisk-checkpoint") throw InputError("not a checkpoint file");
  const int version = j.value("version", 0);
  if (version != kFormatVersion)
    throw InputError("unsupported checkpoint version " + std::to_string(version));
  ChainCheckpoint c;
  try {
    c.chain = j.at("chain").get<std::size_t>();
    c.iterations_done = j.at("iterations_done").get<std::size_t>();
    c.epsilon = j.at("epsilon").get<double>();
    const auto& s = j.at("state");
    c.state.beta = s.at("beta").get<std::vector<double>>();
    c.state.allocation = s.at("allocation").get<std::vector<std::uint32_t>>();
    c.state.cluster_effects = s.at("cluster_effects").get<std::vector<double>>();
    c.state.mass = s.at("mass").get<double>();
    c.rng_state = j.at("rng_state").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed checkpoint: ") + e.what());
  }
  return c;
}

}  // namespace drisk
