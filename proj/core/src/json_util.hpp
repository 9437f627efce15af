#pragma once

// Internal JSON (de)serialization helpers. JSON stays an implementation
// detail of the .cpp files; public headers never expose it.

#include <nlohmann/json.hpp>

#include "behaviorkit/common.hpp"
#include "behaviorkit/model.hpp"
#include "behaviorkit/schedule.hpp"

namespace bk {

using json = nlohmann::ordered_json;

inline json to_json(const EncoderConfig& c) {
  return json{{"frames", c.frames},
              {"image_size", c.image_size},
              {"tubelet", {c.tubelet.t, c.tubelet.h, c.tubelet.w}},
              {"dim", c.dim},
              {"depth", c.depth},
              {"heads", c.heads},
              {"predictor_depth", c.predictor_depth},
              {"predictor_dim", c.predictor_dim}};
}

inline EncoderConfig encoder_config_from_json(const json& j) {
  EncoderConfig c;
  c.frames = j.at("frames").get<int>();
  c.image_size = j.at("image_size").get<int>();
  const auto& t = j.at("tubelet");
  c.tubelet = {t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()};
  c.dim = j.at("dim").get<int>();
  c.depth = j.at("depth").get<int>();
  c.heads = j.at("heads").get<int>();
  c.predictor_depth = j.at("predictor_depth").get<int>();
  c.predictor_dim = j.at("predictor_dim").get<int>();
  return c;
}

inline json to_json(const ScheduleState& s) {
  return json{{"step", s.step},
              {"total_steps", s.total_steps},
              {"warmup_steps", s.warmup_steps},
              {"base_lr", s.base_lr},
              {"initial_wd", s.initial_wd},
              {"final_wd", s.final_wd},
              {"momentum", s.momentum},
              {"momentum_final", s.momentum_final}};
}

inline ScheduleState schedule_from_json(const json& j) {
  ScheduleState s;
  s.step = j.at("step").get<int64_t>();
  s.total_steps = j.at("total_steps").get<int64_t>();
  s.warmup_steps = j.at("warmup_steps").get<int64_t>();
  s.base_lr = j.at("base_lr").get<double>();
  s.initial_wd = j.at("initial_wd").get<double>();
  s.final_wd = j.at("final_wd").get<double>();
  s.momentum = j.at("momentum").get<double>();
  s.momentum_final = j.value("momentum_final", -1.0);
  return s;
}

}  // namespace bk
