#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <type_traits>

#include "json.hpp"

#include "dragwarp/error.hpp"

namespace dragwarp::detail {

using nlohmann::json;

inline json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadJson, e.what());
  }
}

inline void reject_unknown(const json& obj, std::initializer_list<std::string_view> known,
                           const std::string& where) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || item.key() == k;
    if (!ok) throw Error(ErrorCode::UnknownKey, where + item.key());
  }
}

template <typename T>
void read_number(const json& obj, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number()) {
    throw Error(ErrorCode::InvalidArgument, std::string("key '") + key + "' must be a number");
  }
  if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) {
      throw Error(ErrorCode::InvalidArgument, std::string("key '") + key + "' must be an integer");
    }
  }
  out = it->get<T>();
}

}  // namespace dragwarp::detail
