#include "gfm/common/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace gfm::log {

namespace {

Level from_env() {
  const char* env = std::getenv("GFM_LOG");
  if (env == nullptr) return Level::kWarn;
  const std::string v(env);
  if (v == "debug") return Level::kDebug;
  if (v == "info") return Level::kInfo;
  if (v == "error") return Level::kError;
  if (v == "off") return Level::kOff;
  return Level::kWarn;
}

std::atomic<Level>& current() {
  static std::atomic<Level> level{from_env()};
  return level;
}

const char* name(Level level) {
  switch (level) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
    default: return "off";
  }
}

}  // namespace

Level threshold() { return current().load(); }
void set_threshold(Level level) { current().store(level); }

void write(Level level, std::string_view msg, const nlohmann::json& fields) {
  if (level < threshold() || level == Level::kOff) return;
  nlohmann::ordered_json line;
  line["level"] = name(level);
  line["msg"] = msg;
  if (fields.is_object()) {
    for (const auto& [k, v] : fields.items()) line[k] = v;
  }
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << line.dump() << '\n';
}

}  // namespace gfm::log
