#pragma once

#include <string>
#include <utility>
#include <vector>

namespace hps {

/// One named check with an optional witness describing the first failure seen.
struct CheckItem {
  std::string name;
  bool ok = true;
  std::string witness;
};

struct CheckReport {
  std::vector<CheckItem> items;

  void add(std::string name, bool ok, std::string witness = "") {
    items.push_back({std::move(name), ok, std::move(witness)});
  }

  bool all_ok() const {
    for (const auto& item : items)
      if (!item.ok) return false;
    return true;
  }

  const CheckItem* find(const std::string& name) const {
    for (const auto& item : items)
      if (item.name == name) return &item;
    return nullptr;
  }
};

}  // namespace hps
