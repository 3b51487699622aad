#pragma once

#include <string_view>

#include <json.hpp>

namespace gfm::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

// Threshold comes from GFM_LOG (debug|info|warn|error|off), default warn.
Level threshold();
void set_threshold(Level level);

// Emits one JSON object per line on stderr: {"level","msg", ...fields}.
void write(Level level, std::string_view msg, const nlohmann::json& fields = {});

inline void debug(std::string_view m, const nlohmann::json& f = {}) { write(Level::kDebug, m, f); }
inline void info(std::string_view m, const nlohmann::json& f = {}) { write(Level::kInfo, m, f); }
inline void warn(std::string_view m, const nlohmann::json& f = {}) { write(Level::kWarn, m, f); }
inline void error(std::string_view m, const nlohmann::json& f = {}) { write(Level::kError, m, f); }

}  // namespace gfm::log
