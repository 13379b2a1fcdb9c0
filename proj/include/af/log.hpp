#pragma once

#include <cstdlib>
#include <memory>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace af {

// Level comes from AF_LOG (error | info | debug); default is error so library
// users and tests stay quiet.
inline spdlog::level::level_enum log_level_from_env() {
  const char* env = std::getenv("AF_LOG");
  if (env == nullptr) return spdlog::level::err;
  const std::string_view v{env};
  if (v == "debug") return spdlog::level::debug;
  if (v == "info") return spdlog::level::info;
  return spdlog::level::err;
}

inline spdlog::logger& logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    auto existing = spdlog::get("af");
    if (existing) return existing;
    auto created = spdlog::stderr_color_mt("af");
    created->set_level(log_level_from_env());
    created->set_pattern("[af %l] %v");
    return created;
  }();
  return *instance;
}

}  // namespace af
