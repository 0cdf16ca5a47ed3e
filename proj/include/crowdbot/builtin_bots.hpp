#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdbot/bots.hpp"
#include "crowdbot/embedding.hpp"
#include "crowdbot/retrieval.hpp"

namespace crowdbot {

/// Context-free chatterbot: one uniform draw from a fixed list.
class FillerBot final : public Bot {
public:
    static std::vector<std::string> default_fillers();

    explicit FillerBot(BotId id, std::vector<std::string> fillers = default_fillers());

    const BotId& id() const override { return id_; }
    BotResponse respond(const BotContext& context) const override;
    const std::vector<std::string>& fillers() const { return fillers_; }

private:
    BotId id_;
    std::vector<std::string> fillers_;
};

/// Answers with the reply of one of the k nearest stored queries.
class RetrievalBot final : public Bot {
public:
    RetrievalBot(BotId id, std::shared_ptr<const PairStore> store, std::shared_ptr<const VectorTable> table,
                 std::size_t k = 2);

    const BotId& id() const override { return id_; }
    BotResponse respond(const BotContext& context) const override;

private:
    BotId id_;
    std::shared_ptr<const PairStore> store_;
    std::shared_ptr<const VectorTable> table_;
    std::size_t k_;
};

struct City {
    std::string name;
    std::string country;

    friend bool operator==(const City&, const City&) = default;
};

/// Case-insensitive longest token-sequence match of known city names.
class Gazetteer {
public:
    Gazetteer() = default;
    explicit Gazetteer(std::vector<City> cities);

    /// JSON array of {"name", "country"}.
    static Gazetteer load(const std::filesystem::path& path);
    static Gazetteer builtin();

    std::optional<City> find_in(std::string_view text) const;
    std::size_t size() const { return cities_.size(); }

private:
    std::vector<City> cities_;
    std::vector<std::vector<std::string>> tokens_;
};

/// Raised by information providers; the bot maps it to a decline.
class ProviderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct WeatherReport {
    std::string day;
    std::string summary;
};

class WeatherProvider {
public:
    virtual ~WeatherProvider() = default;
    virtual WeatherReport forecast(const City& city) const = 0;
};

class RestaurantProvider {
public:
    virtual ~RestaurantProvider() = default;
    virtual std::vector<std::string> suggestions(const City& city, std::string_view request) const = 0;
};

/// Deterministic provider backed by a JSON map city -> {day, summary}.
class FixtureWeatherProvider final : public WeatherProvider {
public:
    explicit FixtureWeatherProvider(std::map<std::string, WeatherReport> reports) : reports_(std::move(reports)) {}
    static FixtureWeatherProvider load(const std::filesystem::path& path);
    static FixtureWeatherProvider builtin();

    WeatherReport forecast(const City& city) const override;

private:
    std::map<std::string, WeatherReport> reports_;
};

/// Deterministic provider backed by a JSON map city -> [restaurant names].
class FixtureRestaurantProvider final : public RestaurantProvider {
public:
    explicit FixtureRestaurantProvider(std::map<std::string, std::vector<std::string>> lists)
        : lists_(std::move(lists)) {}
    static FixtureRestaurantProvider load(const std::filesystem::path& path);
    static FixtureRestaurantProvider builtin();

    std::vector<std::string> suggestions(const City& city, std::string_view request) const override;

private:
    std::map<std::string, std::vector<std::string>> lists_;
};

class WeatherBot final : public Bot {
public:
    static constexpr std::string_view kFallback = "Which city's weather would you like to know?";

    WeatherBot(BotId id, Gazetteer gazetteer, std::shared_ptr<const WeatherProvider> provider);

    const BotId& id() const override { return id_; }
    BotResponse respond(const BotContext& context) const override;

private:
    BotId id_;
    Gazetteer gazetteer_;
    std::shared_ptr<const WeatherProvider> provider_;
};

class RestaurantBot final : public Bot {
public:
    static constexpr std::string_view kFallback = "You're looking for a restaurant. What city are you in?";

    RestaurantBot(BotId id, Gazetteer gazetteer, std::shared_ptr<const RestaurantProvider> provider,
                  std::size_t max_suggestions = 3);

    const BotId& id() const override { return id_; }
    BotResponse respond(const BotContext& context) const override;

private:
    BotId id_;
    Gazetteer gazetteer_;
    std::shared_ptr<const RestaurantProvider> provider_;
    std::size_t max_suggestions_;
};

/// Fixed reply; handy in tests and scenarios.
class EchoBot final : public Bot {
public:
    EchoBot(BotId id, std::string reply) : id_(std::move(id)), reply_(std::move(reply)) {}

    const BotId& id() const override { return id_; }
    BotResponse respond(const BotContext&) const override { return BotResponse::say(reply_); }

private:
    BotId id_;
    std::string reply_;
};

}  // namespace crowdbot
