#pragma once

#include <memory>
#include <string>

#include "brl/envs/line_world.hpp"
#include "brl/envs/point_mass.hpp"
#include "brl/envs/pendulum.hpp"

namespace brl::envs {

// Environment selection plus the physical parameters for whichever one is
// named. The harness fills the parameter structs from config keys.
struct EnvFactory {
  std::string name = "point_mass";
  PointMassParams point_mass;
  PendulumParams pendulum;
  LineWorldParams line_world;

  std::unique_ptr<Env> make() const {
    if (name == "point_mass") return std::make_unique<PointMass2D>(point_mass);
    if (name == "pendulum") return std::make_unique<Pendulum1>(pendulum);
    if (name == "line_world") return std::make_unique<LineWorld>(line_world);
    throw ContractViolation("unknown environment: " + name);
  }

  int default_episode_steps() const {
    if (name == "point_mass") return point_mass.episode_steps;
    if (name == "pendulum") return pendulum.episode_steps;
    if (name == "line_world") return line_world.episode_steps;
    throw ContractViolation("unknown environment: " + name);
  }
};

}  // namespace brl::envs
