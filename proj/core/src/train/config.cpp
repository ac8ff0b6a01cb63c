#include "semamba/train/config.hpp"

#include <set>

#include "semamba/error.hpp"

namespace semamba::train {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

void TrainConfig::validate() const {
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (labelled_batch < 1 || labelled_batch > batch_size) {
    throw ConfigError("labelled_batch must lie in [1, batch_size]");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (validate_every < 1) throw ConfigError("validate_every must be positive");
  if (projector_grid < 1) throw ConfigError("projector_grid must be positive");
  if (eval_batch < 1) throw ConfigError("eval_batch must be positive");
  try {
    net1.validate();
    net2.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (net1.classes != net2.classes) throw ConfigError("net1 and net2 must agree on classes");
  if (net1.input_size != net2.input_size) throw ConfigError("net1 and net2 must agree on input_size");
  if (projector_grid > net1.input_size) throw ConfigError("projector_grid exceeds input_size");
  if (!losses.sup && !losses.semi && !losses.contra) {
    throw ConfigError("at least one loss term must be enabled");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"iterations", iterations},
          {"batch_size", batch_size},
          {"labelled_batch", labelled_batch},
          {"learning_rate", learning_rate},
          {"momentum", momentum},
          {"weight_decay", weight_decay},
          {"validate_every", validate_every},
          {"seed", seed},
          {"net1", net1.to_json()},
          {"net2", net2.to_json()},
          {"losses", {{"sup", losses.sup}, {"semi", losses.semi}, {"contra", losses.contra}}},
          {"projector_grid", projector_grid},
          {"augment", augment},
          {"deterministic", deterministic},
          {"eval_batch", eval_batch}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"iterations", "batch_size", "labelled_batch", "learning_rate", "momentum",
                  "weight_decay", "validate_every", "seed", "net1", "net2", "losses",
                  "projector_grid", "augment", "deterministic", "eval_batch"},
                 "train config");
  TrainConfig c;
  try {
    read(j, "iterations", c.iterations);
    read(j, "batch_size", c.batch_size);
    read(j, "labelled_batch", c.labelled_batch);
    read(j, "learning_rate", c.learning_rate);
    read(j, "momentum", c.momentum);
    read(j, "weight_decay", c.weight_decay);
    read(j, "validate_every", c.validate_every);
    read(j, "seed", c.seed);
    read(j, "projector_grid", c.projector_grid);
    read(j, "augment", c.augment);
    read(j, "deterministic", c.deterministic);
    read(j, "eval_batch", c.eval_batch);
    if (j.contains("net1")) c.net1 = nets::NetworkSpec::from_json(j.at("net1"));
    if (j.contains("net2")) c.net2 = nets::NetworkSpec::from_json(j.at("net2"));
    if (j.contains("losses")) {
      const auto& l = j.at("losses");
      reject_unknown(l, {"sup", "semi", "contra"}, "train config losses");
      read(l, "sup", c.losses.sup);
      read(l, "semi", c.losses.semi);
      read(l, "contra", c.losses.contra);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

uint64_t TrainConfig::hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json().dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace semamba::train
