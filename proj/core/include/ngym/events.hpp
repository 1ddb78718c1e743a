#pragma once

#include <functional>
#include <string>

#include <nlohmann/json.hpp>

namespace ngym {

/// Progress notification emitted by the engine and the service.
/// Types: "episode", "revision", "warning", "status".
struct Event {
  std::string type;
  nlohmann::ordered_json data;
};

using EventSink = std::function<void(const Event&)>;

inline void emit(const EventSink& sink, std::string type, nlohmann::ordered_json data) {
  if (sink) sink(Event{std::move(type), std::move(data)});
}

}  // namespace ngym
