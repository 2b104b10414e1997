#pragma once

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vpm/config.hpp"
#include "vpm/nn.hpp"
#include "vpm/observation.hpp"

namespace vpm {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Versioned text container for a trained network: the full training config
// (with its hash, verified on load), the observation normalization constants
// the weights were trained against, and every parameter tensor. Doubles are
// printed with 17 significant digits so a save/load round trip is bit-exact.
inline void save_checkpoint(const std::string& path, PolicyNet& net, const KvConfig& config) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  char buf[64];

  out << "vpm-checkpoint 1\n";
  std::snprintf(buf, sizeof buf, "%016" PRIx64, config.hash());
  out << "config-hash " << buf << "\n";
  out << "config-begin\n" << config.canonical() << "config-end\n";
  std::snprintf(buf, sizeof buf, "%.17g %.17g", kObstacleNorm, kAgentNorm);
  out << "norm " << buf << "\n";

  for (auto& [name, p] : net.named_params()) {
    out << "param " << name << " " << p->value.shape.size();
    for (int d : p->value.shape) out << " " << d;
    out << "\n";
    for (std::size_t i = 0; i < p->value.v.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", p->value.v[i]);
      out << buf << ((i + 1) % 8 == 0 || i + 1 == p->value.v.size() ? "\n" : " ");
    }
  }
  out << "end\n";
  if (!out) throw CheckpointError("write failed: " + path);
}

struct Checkpoint {
  PolicyNet net;
  KvConfig config;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);

  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "vpm-checkpoint")
    throw CheckpointError("not a checkpoint file: " + path);
  if (version != 1) throw CheckpointError("unsupported checkpoint version");

  std::string stored_hash;
  if (!(in >> word >> stored_hash) || word != "config-hash")
    throw CheckpointError("checkpoint missing config hash");
  in >> word;
  if (word != "config-begin") throw CheckpointError("checkpoint missing config block");
  in.ignore(1);
  std::string config_text, line;
  while (std::getline(in, line) && line != "config-end") config_text += line + "\n";

  const KvConfig config = KvConfig::parse_text(config_text);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, config.hash());
  if (stored_hash != buf)
    throw CheckpointError("checkpoint config hash mismatch (file corrupted or edited)");

  double obstacle_norm = 0.0, agent_norm = 0.0;
  if (!(in >> word >> obstacle_norm >> agent_norm) || word != "norm")
    throw CheckpointError("checkpoint missing normalization constants");
  if (obstacle_norm != kObstacleNorm || agent_norm != kAgentNorm)
    throw CheckpointError("checkpoint was written with different observation normalization");

  NetConfig net_cfg;
  net_cfg.channels = obs_channels(obs_mode_from_name(config.require_str("obs_mode")));
  net_cfg.feature_dim = static_cast<int>(config.get_int("feature_dim", 128));
  net_cfg.heads = static_cast<int>(config.get_int("heads", 3));
  net_cfg.head_hidden = static_cast<int>(config.get_int("head_hidden", 64));

  Rng dummy(0);
  Checkpoint ck{make_policy_net(net_cfg, dummy), config};
  for (auto& [name, p] : ck.net.named_params()) {
    std::string tag, pname;
    std::size_t rank = 0;
    if (!(in >> tag >> pname >> rank) || tag != "param" || pname != name)
      throw CheckpointError("checkpoint parameter order mismatch at " + name);
    std::vector<int> shape(rank);
    for (auto& d : shape) in >> d;
    if (shape != p->value.shape)
      throw CheckpointError("checkpoint shape mismatch for " + name);
    for (auto& x : p->value.v)
      if (!(in >> x)) throw CheckpointError("checkpoint truncated in " + name);
  }
  if (!(in >> word) || word != "end") throw CheckpointError("checkpoint missing end marker");
  return ck;
}

}  // namespace vpm
