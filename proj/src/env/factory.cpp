#include "sparc/env/env.hpp"
#include "sparc/env/linear_racer.hpp"
#include "sparc/env/windy_pointmass.hpp"

namespace sparc::env {

std::unique_ptr<Env> make_env(const std::string& name,
                              const EnvOverrides& overrides) {
  if (name == "windy_pointmass")
    return std::make_unique<WindyPointMass>(
        WindyPointMass::params_from(overrides));
  if (name == "linear_racer")
    return std::make_unique<LinearRacer>(LinearRacer::params_from(overrides));
  throw ConfigError("unknown environment: " + name);
}

}  // namespace sparc::env
