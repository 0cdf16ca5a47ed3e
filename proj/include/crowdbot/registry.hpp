#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "crowdbot/bots.hpp"
#include "crowdbot/embedding.hpp"
#include "json.hpp"

namespace crowdbot {

struct RegisteredBot {
    std::shared_ptr<const Bot> bot;
    /// Bootstrap examples for the selector's cold start.
    std::vector<std::string> examples;
    /// Free-form tags (the simulator reads "topics" from here).
    nlohmann::json meta;
};

struct BotRegistry {
    std::vector<RegisteredBot> bots;

    std::vector<std::shared_ptr<const Bot>> instances() const;
    const RegisteredBot* find(const BotId& id) const;
};

/// Registry document:
///   {"bots": [{"id", "type", "examples"?: [..], "options"?: {..}, "meta"?: {..}}]}
/// Types: filler, retrieval, weather, restaurant, echo, http. File paths in
/// options are resolved against `base_dir`.
BotRegistry parse_registry(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                           std::shared_ptr<const VectorTable> table);
BotRegistry load_registry(const std::filesystem::path& path, std::shared_ptr<const VectorTable> table);

}  // namespace crowdbot
