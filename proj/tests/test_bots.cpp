#include <atomic>
#include <fstream>
#include <map>
#include <thread>

#include "crowdbot/builtin_bots.hpp"
#include "crowdbot/engine.hpp"
#include "crowdbot/errors.hpp"
#include "crowdbot/http_bot.hpp"
#include "crowdbot/registry.hpp"
#include "doctest.h"
#include "httplib.h"
#include "support.hpp"

using namespace crowdbot;
using namespace std::chrono_literals;
using testing::at;

namespace {

BotContext ask(const std::string& text, std::uint64_t seed = 0) {
    BotContext c;
    c.conversation = ConversationId{1};
    c.log.push_back({"u", Role::User, text, MessageState::Accepted, at(0)});
    c.user_message = text;
    c.seed = seed;
    return c;
}

class ThrowingBot final : public Bot {
public:
    const BotId& id() const override { return id_; }
    BotResponse respond(const BotContext&) const override { throw std::runtime_error("boom"); }

private:
    BotId id_ = "thrower";
};

class SlowBot final : public Bot {
public:
    explicit SlowBot(std::chrono::milliseconds d) : delay_(d) {}
    const BotId& id() const override { return id_; }
    BotResponse respond(const BotContext&) const override {
        std::this_thread::sleep_for(delay_);
        return BotResponse::say("late");
    }

private:
    BotId id_ = "slow";
    std::chrono::milliseconds delay_;
};

class EmptyBot final : public Bot {
public:
    const BotId& id() const override { return id_; }
    BotResponse respond(const BotContext&) const override { return BotResponse::say(""); }

private:
    BotId id_ = "empty";
};

}  // namespace

TEST_CASE("filler draws uniformly from its list and is seed-deterministic") {
    FillerBot bot("filler");
    const auto& list = bot.fillers();
    std::map<std::string, int> counts;
    for (std::uint64_t s = 0; s < 10000; ++s) {
        auto r = bot.respond(ask("anything", s));
        REQUIRE(r.text);
        REQUIRE(std::find(list.begin(), list.end(), *r.text) != list.end());
        ++counts[*r.text];
    }
    CHECK(counts.size() == list.size());
    const double expected = 10000.0 / list.size();
    for (const auto& [_, n] : counts) CHECK(std::abs(n - expected) < 0.25 * expected);
    CHECK(*bot.respond(ask("x", 7)).text == *bot.respond(ask("y", 7)).text);
    CHECK_THROWS_AS(FillerBot("f", {}), ValidationError);
}

TEST_CASE("gazetteer finds the longest city match") {
    const auto g = Gazetteer::builtin();
    CHECK(g.find_in("What's the weather in Kabul?")->name == "Kabul");
    CHECK(g.find_in("sushi in new york please")->name == "New York");
    CHECK(g.find_in("I love newyork") == std::nullopt);
    CHECK(g.find_in("") == std::nullopt);
    Gazetteer custom(std::vector<City>{{"York", "United Kingdom"}, {"New York", "United States"}});
    CHECK(custom.find_in("flights to new york")->country == "United States");
    CHECK(custom.find_in("flights to york")->country == "United Kingdom");
    CHECK_THROWS_AS(Gazetteer(std::vector<City>{{"!!", "x"}}), ValidationError);
}

TEST_CASE("weather bot formats forecasts and falls back") {
    WeatherBot bot("weather", Gazetteer::builtin(),
                   std::make_shared<FixtureWeatherProvider>(FixtureWeatherProvider::builtin()));
    CHECK(*bot.respond(ask("What's the weather in Kabul?")).text ==
          "Friday's weather forecast for [Kabul, Afghanistan]: Cloudy with a few showers. High 79F. Winds NW at 5 "
          "to 10 mph. Chance of rain 30%.");
    CHECK(*bot.respond(ask("will it rain?")).text == WeatherBot::kFallback);
    // known city without a forecast
    CHECK(bot.respond(ask("weather in Tokyo")).declined());
}

TEST_CASE("restaurant bot lists suggestions") {
    RestaurantBot bot("restaurant", Gazetteer::builtin(),
                      std::make_shared<FixtureRestaurantProvider>(FixtureRestaurantProvider::builtin()));
    CHECK(*bot.respond(ask("sushi in Seattle?")).text ==
          "Here are some restaurants in Seattle: Shiro's Sushi, Umi Sake House, Sushi Kashiba.");
    CHECK(*bot.respond(ask("any good food?")).text == RestaurantBot::kFallback);
    CHECK(bot.respond(ask("dinner in Paris")).declined());
    RestaurantBot two("r2", Gazetteer::builtin(),
                      std::make_shared<FixtureRestaurantProvider>(FixtureRestaurantProvider::builtin()), 2);
    CHECK(*two.respond(ask("food in pittsburgh")).text == "Here are some restaurants in Pittsburgh: Umami, Chaya.");
    RestaurantBot none("r3", Gazetteer::builtin(),
                       std::make_shared<FixtureRestaurantProvider>(
                           std::map<std::string, std::vector<std::string>>{{"Seattle", {}}}));
    CHECK(none.respond(ask("food in seattle")).declined());
}

TEST_CASE("retrieval bot answers from its store and declines on OOV") {
    auto table = testing::toy_table();
    auto store = std::make_shared<PairStore>(
        build_store({{"weather in kabul", {}, "Cloudy", "", 1, 0}, {"hello", {}, "Hi!", "", 1, 0}}, *table));
    RetrievalBot bot("retrieval", store, table, 1);
    CHECK(*bot.respond(ask("kabul weather?")).text == "Cloudy");
    CHECK(*bot.respond(ask("hi")).text == "Hi!");
    CHECK(bot.respond(ask("zzz")).declined());
}

TEST_CASE("invoker maps failures, timeouts and empty text to declines") {
    std::vector<std::shared_ptr<const Bot>> bots = {std::make_shared<EchoBot>("echo", "hello"),
                                                     std::make_shared<ThrowingBot>(), std::make_shared<EmptyBot>(),
                                                     std::make_shared<SlowBot>(500ms)};
    const auto t0 = std::chrono::steady_clock::now();
    auto out = invoke_bots(bots, ask("hi"), 100ms);
    const auto elapsed = std::chrono::steady_clock::now() - t0;
    CHECK(elapsed < 400ms);
    REQUIRE(out.size() == 4);
    CHECK(out[0].bot == "echo");
    CHECK(*out[0].response.text == "hello");
    CHECK_FALSE(out[0].error);
    CHECK(out[1].response.declined());
    CHECK(*out[1].error == "boom");
    CHECK(out[2].response.declined());
    CHECK_FALSE(out[2].error);
    CHECK(out[3].timed_out);
    CHECK(out[3].response.declined());
    // inline mode waits for everything
    auto inline_out = invoke_bots({std::make_shared<SlowBot>(20ms)}, ask("hi"), 0ms);
    CHECK(*inline_out[0].response.text == "late");
    CHECK(invoke_bot(std::make_shared<ThrowingBot>(), ask("x"), 0ms).response.declined());
}

TEST_CASE("context and response wire round trips") {
    Engine e;
    auto c = e.open_conversation("u", PhaseConfig::phase2(), true, at(0));
    e.join_worker(c, "w1", at(0));
    e.join_worker(c, "w2", at(0));
    e.join_worker(c, "w3", at(0));
    e.post_user_message(c, "weather in Kabul?", at(1));
    e.propose_response(c, "w1", Role::Worker, "Cloudy", std::nullopt, at(2));
    auto ctx = make_context(e.conversation(c), 42);
    CHECK(ctx.user_message == "weather in Kabul?");
    REQUIRE(ctx.log.size() == 2);
    CHECK(ctx.log[1].state == MessageState::Proposed);
    const auto wire = context_to_wire(ctx);
    CHECK(wire["conversation_id"] == c.value);
    CHECK(wire["messages"][1]["role"] == "worker");
    CHECK(wire["messages"][1]["timestamp"] == 2);
    const auto back = context_from_wire(wire);
    CHECK(back.user_message == ctx.user_message);
    CHECK(back.log.size() == 2);
    CHECK(back.log[1].text == "Cloudy");
    CHECK_THROWS_AS(context_from_wire(nlohmann::json{{"messages", 1}}), ValidationError);

    CHECK(response_to_wire(BotResponse::decline())["text"].is_null());
    CHECK(response_to_wire(BotResponse{"hi", 0.5})["confidence"] == 0.5);
    CHECK(*response_from_wire({{"text", "hi"}}).text == "hi");
    CHECK(response_from_wire({{"text", nullptr}}).declined());
    CHECK(response_from_wire({{"text", ""}}).declined());
    CHECK_THROWS_AS(response_from_wire({{"text", 3}}), ValidationError);
    CHECK_THROWS_AS(response_from_wire(nlohmann::json::array()), ValidationError);
}

TEST_CASE("http bot talks to a local endpoint and declines when it is down") {
    httplib::Server server;
    std::atomic<int> calls{0};
    server.Post("/respond", [&](const httplib::Request& req, httplib::Response& res) {
        ++calls;
        const auto ctx = context_from_wire(nlohmann::json::parse(req.body));
        res.set_content(response_to_wire(BotResponse::say("echo: " + ctx.user_message)).dump(), "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    server.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json", "text/plain");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const std::string base = "http://127.0.0.1:" + std::to_string(port);
    auto ok = std::make_shared<HttpBot>("remote", base);
    CHECK(*ok->respond(ask("hi there")).text == "echo: hi there");
    CHECK(calls == 1);
    auto broken = std::make_shared<HttpBot>("broken", base, "/broken", 1000ms);
    auto inv = invoke_bot(broken, ask("x"), 0ms);
    CHECK(inv.response.declined());
    CHECK(inv.error);
    CHECK(invoke_bot(std::make_shared<HttpBot>("g", base, "/garbage", 1000ms), ask("x"), 0ms).response.declined());

    server.stop();
    th.join();
    auto down = std::make_shared<HttpBot>("down", base, "/respond", 300ms);
    auto d = invoke_bot(down, ask("x"), 2000ms);
    CHECK(d.response.declined());
    CHECK(d.error);
    CHECK_FALSE(d.timed_out);
    CHECK_THROWS_AS(HttpBot("bad", "ftp://example.com"), ValidationError);
}

TEST_CASE("registry builds every bot type and resolves relative paths") {
    testing::TempDir dir;
    {
        std::ofstream(dir / "pairs.jsonl") << R"({"query":"weather in kabul","response":"Cloudy","votes":{"up":1,"down":0}})"
                                           << '\n';
        std::ofstream(dir / "cities.json") << R"([{"name":"Kabul","country":"Afghanistan"}])";
        std::ofstream(dir / "wx.json") << R"({"Kabul":{"day":"Monday","summary":"Hot."}})";
        std::ofstream(dir / "food.json") << R"({"Kabul":["A","B"]})";
        std::ofstream(dir / "registry.json") << R"({"bots":[
            {"id":"filler","type":"filler","options":{"fillers":["Okay"]}},
            {"id":"chorus","type":"retrieval","options":{"pairs":"pairs.jsonl","k":1}},
            {"id":"weather","type":"weather","examples":["weather in kabul"],
             "options":{"gazetteer":"cities.json","fixture":"wx.json"},"meta":{"topics":["weather"]}},
            {"id":"food","type":"restaurant","options":{"fixture":"food.json","max_suggestions":1}},
            {"id":"echo","type":"echo","options":{"reply":"hey"}},
            {"id":"remote","type":"http","options":{"url":"http://127.0.0.1:9","timeout_ms":50}}]})";
    }
    auto reg = load_registry(dir / "registry.json", testing::toy_table());
    REQUIRE(reg.bots.size() == 6);
    CHECK(reg.instances().size() == 6);
    CHECK(*reg.find("filler")->bot->respond(ask("x")).text == "Okay");
    CHECK(*reg.find("chorus")->bot->respond(ask("kabul")).text == "Cloudy");
    CHECK(*reg.find("weather")->bot->respond(ask("kabul?")).text ==
          "Monday's weather forecast for [Kabul, Afghanistan]: Hot.");
    CHECK(reg.find("weather")->examples == std::vector<std::string>{"weather in kabul"});
    CHECK(reg.find("weather")->meta["topics"][0] == "weather");
    CHECK(*reg.find("food")->bot->respond(ask("kabul food")).text == "Here are some restaurants in Kabul: A.");
    CHECK(reg.find("nope") == nullptr);

    const nlohmann::json dup = {{"bots", {{{"id", "a"}, {"type", "echo"}, {"options", {{"reply", "x"}}}},
                                          {{"id", "a"}, {"type", "echo"}, {"options", {{"reply", "y"}}}}}}};
    CHECK_THROWS_AS(parse_registry(dup, dir.path, nullptr), ValidationError);
    const nlohmann::json unknown = {{"bots", {{{"id", "a"}, {"type", "oracle"}}}}};
    CHECK_THROWS_AS(parse_registry(unknown, dir.path, nullptr), ValidationError);
    const nlohmann::json no_table = {{"bots", {{{"id", "r"}, {"type", "retrieval"}, {"options", {{"pairs", "pairs.jsonl"}}}}}}};
    CHECK_THROWS_AS(parse_registry(no_table, dir.path, nullptr), ValidationError);
    CHECK_THROWS_AS(Gazetteer::load(dir / "wx.json"), FormatError);
}
