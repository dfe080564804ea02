#pragma once

#include <string>

namespace treenav::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3 };

/// Threshold comes from TREENAV_LOG (debug|info|warn|error), default info.
Level threshold();

void emit(Level level, const std::string& msg);

inline void debug(const std::string& m) { emit(Level::Debug, m); }
inline void info(const std::string& m) { emit(Level::Info, m); }
inline void warn(const std::string& m) { emit(Level::Warn, m); }
inline void error(const std::string& m) { emit(Level::Error, m); }

}  // namespace treenav::log
