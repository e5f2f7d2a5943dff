#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"
#include "solis/error.hpp"

namespace solis {

// Reads an optional field, reporting type errors with the field path.
template <class T>
T read_field(const nlohmann::json& j, const char* key, const T& fallback, std::string_view path) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(path) + "." + key + ": " + e.what());
    }
}

// Rejects keys outside `allowed` so typos do not silently fall back to defaults.
inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                       std::string_view path) {
    if (!j.is_object()) throw ConfigError(std::string(path) + ": expected an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || item.key() == a;
        if (!ok) throw ConfigError(std::string(path) + "." + item.key() + ": unknown field");
    }
}

}  // namespace solis
