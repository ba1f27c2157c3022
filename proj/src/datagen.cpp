#include "cnlu/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cnlu {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int64_t kHour = 3600;
// Fixed reference chat time; per-example jitter shifts whole records so the
// derived hour differences are unaffected.
constexpr int64_t kBaseChatTime = 1767225600;  // 2026-01-01 00:00 UTC

const std::vector<std::string> kUtteranceMaster = {
    "greet",        "agent_contact",       "affirmative",   "thanks",
    "where_is_my_order", "order_late",     "cancel_order",  "why_order_cancelled",
    "missing_items",     "return_item",    "where_is_refund", "substitution_issue"};

const std::vector<std::string> kFlowMaster = {
    "where_is_my_order", "order_late",      "cancel_order",    "why_order_cancelled",
    "missing_items",     "return_item",     "where_is_refund", "substitution_issue"};

const char* kFulfillments[] = {"shipping", "home_delivery", "store_pickup"};
const char* kStores[] = {"store_alpha", "store_beta",  "store_gamma",
                         "store_delta", "store_epsilon", "store_zeta"};
const char* kStoreCancelReasons[] = {"out_of_stock", "payment_issue", "pricing_error"};

std::string pick(const std::vector<std::string>& options, Rng& rng) {
  return options[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(options.size()) - 1))];
}

}  // namespace

const char* order_state_name(OrderState s) {
  switch (s) {
    case OrderState::in_transit: return "in_transit";
    case OrderState::pre_ship: return "pre_ship";
    case OrderState::overdue: return "overdue";
    case OrderState::delivered_missing: return "delivered_missing";
    case OrderState::store_cancelled: return "store_cancelled";
    case OrderState::customer_cancelled: return "customer_cancelled";
    case OrderState::return_open: return "return_open";
    case OrderState::substituted: return "substituted";
  }
  return "in_transit";
}

OrderState classify_state(const RawFeatures& f) {
  if (f.any_items_cancelled_by_store) return OrderState::store_cancelled;
  if (f.any_items_cancelled_by_customer) return OrderState::customer_cancelled;
  if (f.any_returns_initiated) return OrderState::return_open;
  if (f.any_items_substituted) return OrderState::substituted;
  if (f.any_items_past_expected_delivery) return OrderState::overdue;
  if (!f.any_items_left_to_deliver) return OrderState::delivered_missing;
  if (f.all_items_left_to_ship) return OrderState::pre_ship;
  return OrderState::in_transit;
}

namespace {

ItemRecord item_pre_ship(int64_t order_at, int64_t chat_at, Rng& rng) {
  ItemRecord item;
  item.expected_delivery_at = chat_at + rng.uniform_int(24, 120) * kHour;
  (void)order_at;
  return item;
}

ItemRecord item_in_transit(int64_t order_at, int64_t chat_at, Rng& rng) {
  ItemRecord item;
  const int64_t max_ship_offset = std::max<int64_t>(1, (chat_at - order_at) / kHour - 1);
  item.shipped_at = order_at + rng.uniform_int(1, std::min<int64_t>(24, max_ship_offset)) * kHour;
  item.expected_delivery_at = chat_at + rng.uniform_int(12, 96) * kHour;
  return item;
}

ItemRecord item_overdue(int64_t order_at, int64_t chat_at, Rng& rng) {
  ItemRecord item;
  const int64_t order_age_h = (chat_at - order_at) / kHour;
  item.shipped_at = order_at + rng.uniform_int(1, std::min<int64_t>(24, order_age_h - 8)) * kHour;
  const int64_t ship_age_h = (chat_at - *item.shipped_at) / kHour;
  item.expected_delivery_at =
      chat_at - rng.uniform_int(2, std::max<int64_t>(3, std::min<int64_t>(72, ship_age_h - 2))) * kHour;
  return item;
}

ItemRecord item_delivered(int64_t order_at, int64_t chat_at, int64_t min_age_h, int64_t max_age_h,
                          Rng& rng) {
  ItemRecord item;
  const int64_t order_age_h = (chat_at - order_at) / kHour;
  const int64_t age_cap = std::min<int64_t>(max_age_h, order_age_h - 2);
  const int64_t delivered_age = rng.uniform_int(std::min(min_age_h, age_cap), age_cap);
  item.delivered_at = chat_at - delivered_age * kHour;
  const int64_t ship_span_h = (*item.delivered_at - order_at) / kHour;
  item.shipped_at = order_at + rng.uniform_int(1, std::max<int64_t>(1, ship_span_h)) * kHour;
  if (*item.shipped_at > *item.delivered_at) item.shipped_at = *item.delivered_at;
  item.expected_delivery_at = *item.shipped_at + rng.uniform_int(24, 96) * kHour;
  return item;
}

ItemRecord item_cancelled(CancelledBy who) {
  ItemRecord item;
  item.cancelled_by = who;
  return item;
}

}  // namespace

TransactionRecord sample_state_record(OrderState state, Rng& rng) {
  TransactionRecord r;
  r.chat_at = kBaseChatTime + rng.uniform_int(-720, 720) * kHour;
  r.fulfillment_type = kFulfillments[rng.uniform_int(0, 2)];
  r.store_indicator = kStores[rng.uniform_int(0, 5)];
  const int n = static_cast<int>(rng.uniform_int(1, 5));
  r.items.reserve(static_cast<size_t>(n));

  const auto order_hours_ago = [&](int64_t lo, int64_t hi) {
    r.order_placed_at = r.chat_at - rng.uniform_int(lo, hi) * kHour;
  };

  switch (state) {
    case OrderState::pre_ship:
      order_hours_ago(2, 24);
      for (int i = 0; i < n; ++i) r.items.push_back(item_pre_ship(r.order_placed_at, r.chat_at, rng));
      break;
    case OrderState::in_transit:
      order_hours_ago(10, 160);
      for (int i = 0; i < n; ++i) {
        r.items.push_back(item_in_transit(r.order_placed_at, r.chat_at, rng));
      }
      break;
    case OrderState::overdue: {
      order_hours_ago(48, 240);
      // At least one overdue item; the rest may still be in transit.
      const int overdue_count = rng.uniform01() < 0.7 ? n : 1 + static_cast<int>(rng.uniform_int(0, n - 1));
      for (int i = 0; i < n; ++i) {
        r.items.push_back(i < overdue_count ? item_overdue(r.order_placed_at, r.chat_at, rng)
                                            : item_in_transit(r.order_placed_at, r.chat_at, rng));
      }
      break;
    }
    case OrderState::delivered_missing:
      order_hours_ago(24, 160);
      for (int i = 0; i < n; ++i) {
        r.items.push_back(item_delivered(r.order_placed_at, r.chat_at, 1, 48, rng));
      }
      break;
    case OrderState::store_cancelled: {
      order_hours_ago(48, 160);
      if (rng.uniform01() < 0.4) r.cancellation_reason = kStoreCancelReasons[rng.uniform_int(0, 2)];
      const int cancelled = rng.uniform01() < 0.65 ? n : 1 + static_cast<int>(rng.uniform_int(0, n - 1));
      const bool rest_overdue = rng.uniform01() < 0.6;
      for (int i = 0; i < n; ++i) {
        r.items.push_back(i < cancelled ? item_cancelled(CancelledBy::store)
                          : rest_overdue ? item_overdue(r.order_placed_at, r.chat_at, rng)
                                         : item_pre_ship(r.order_placed_at, r.chat_at, rng));
      }
      break;
    }
    case OrderState::customer_cancelled: {
      order_hours_ago(48, 160);
      if (rng.uniform01() < 0.4) r.cancellation_reason = "customer_request";
      const int cancelled = rng.uniform01() < 0.65 ? n : 1 + static_cast<int>(rng.uniform_int(0, n - 1));
      const bool rest_overdue2 = rng.uniform01() < 0.6;
      for (int i = 0; i < n; ++i) {
        r.items.push_back(i < cancelled ? item_cancelled(CancelledBy::customer)
                          : rest_overdue2 ? item_overdue(r.order_placed_at, r.chat_at, rng)
                                          : item_pre_ship(r.order_placed_at, r.chat_at, rng));
      }
      break;
    }
    case OrderState::return_open: {
      order_hours_ago(48, 240);
      const int returned = 1 + static_cast<int>(rng.uniform_int(0, n - 1));
      const bool rest_overdue = n > 1 && rng.uniform01() < 0.35;
      for (int i = 0; i < n; ++i) {
        if (i >= returned && rest_overdue) {
          r.items.push_back(item_overdue(r.order_placed_at, r.chat_at, rng));
          continue;
        }
        ItemRecord item = item_delivered(r.order_placed_at, r.chat_at, 24, 96, rng);
        item.return_initiated = i < returned;
        r.items.push_back(std::move(item));
      }
      break;
    }
    case OrderState::substituted: {
      order_hours_ago(24, 160);
      const int substituted = 1 + static_cast<int>(rng.uniform_int(0, n - 1));
      for (int i = 0; i < n; ++i) {
        ItemRecord item = item_delivered(r.order_placed_at, r.chat_at, 1, 72, rng);
        item.substituted = i < substituted;
        r.items.push_back(std::move(item));
      }
      break;
    }
  }

  if (classify_state(derive_raw_features(r)) != state) {
    throw std::logic_error(std::string("sample_state_record: generated record does not "
                                       "classify back to ") +
                           order_state_name(state));
  }
  return r;
}

ScenarioLabels Scenario::labels_for(const std::optional<RawFeatures>& features) const {
  if (!features) {
    if (requires_context) {
      throw std::invalid_argument("scenario " + name + " requires context");
    }
    return contextless_labels;
  }
  const OrderState state = classify_state(*features);
  const auto it = state_labels.find(state);
  if (it == state_labels.end()) {
    throw std::invalid_argument("scenario " + name + " has no label rule for state " +
                                order_state_name(state));
  }
  return it->second;
}

bool Scenario::is_distinct(OrderState state) const {
  const auto it = state_labels.find(state);
  if (it == state_labels.end()) return false;
  return it->second.utterance != it->second.conversation;
}

namespace {

// The latent resolution shared by every non-flow family: with no usable
// signal in the query, the conversation intent is a function of the order
// state alone.
const std::map<OrderState, std::string>& latent_map() {
  static const std::map<OrderState, std::string> m = {
      {OrderState::in_transit, "where_is_my_order"},
      {OrderState::pre_ship, "where_is_my_order"},
      {OrderState::overdue, "order_late"},
      {OrderState::delivered_missing, "missing_items"},
      {OrderState::store_cancelled, "why_order_cancelled"},
      {OrderState::customer_cancelled, "where_is_refund"},
      {OrderState::return_open, "where_is_refund"},
      {OrderState::substituted, "substitution_issue"},
  };
  return m;
}

Scenario make_nonflow(std::string name, std::vector<std::string> templates, double weight,
                      std::vector<Scenario::StateWeight> states,
                      std::map<OrderState, std::string> conversation_overrides = {}) {
  Scenario s;
  s.name = std::move(name);
  s.templates = std::move(templates);
  s.requires_context = true;
  s.weight = weight;
  s.states = std::move(states);
  for (const auto& sw : s.states) {
    const auto it = conversation_overrides.find(sw.state);
    s.state_labels[sw.state] = {
        s.name, it != conversation_overrides.end() ? it->second : latent_map().at(sw.state)};
  }
  return s;
}

Scenario make_fixed(std::string name, std::string intent, std::vector<std::string> templates,
                    double weight, std::vector<Scenario::StateWeight> states,
                    std::map<OrderState, std::string> conversation_overrides = {}) {
  Scenario s;
  s.name = std::move(name);
  s.templates = std::move(templates);
  s.weight = weight;
  s.states = std::move(states);
  for (const auto& sw : s.states) {
    const auto it = conversation_overrides.find(sw.state);
    s.state_labels[sw.state] = {intent,
                                it != conversation_overrides.end() ? it->second : intent};
  }
  s.contextless_labels = {intent, intent};
  return s;
}

std::vector<Scenario> build_default_scenarios() {
  using SW = Scenario::StateWeight;
  std::vector<Scenario> out;

  // Non-flow families: the latent intent lives entirely in the context. The
  // state mixes are deliberately skewed per family so an utterance shortcut
  // looks attractive during training.
  out.push_back(make_nonflow(
      "greet", {"hello", "hi", "hi there", "hello there", "hey", "good morning", "good evening",
                "hey there"},
      0.12,
      {SW{OrderState::store_cancelled, 0.62}, SW{OrderState::return_open, 0.28},
       SW{OrderState::customer_cancelled, 0.08}, SW{OrderState::in_transit, 0.02},
       SW{OrderState::overdue, 0.0}}));
  out.push_back(make_nonflow(
      "agent_contact",
      {"contact customer care", "talk to an agent", "connect me to an agent",
       "i need a human agent", "customer service please", "let me speak to a person",
       "agent please"},
      0.08,
      {SW{OrderState::return_open, 0.35}, SW{OrderState::store_cancelled, 0.22},
       SW{OrderState::overdue, 0.08}, SW{OrderState::delivered_missing, 0.22},
       SW{OrderState::substituted, 0.13}}));
  out.push_back(make_nonflow(
      "thanks", {"thanks", "thank you", "thanks a lot", "great thank you", "thank you so much"},
      0.05,
      {SW{OrderState::substituted, 0.30}, SW{OrderState::delivered_missing, 0.30},
       SW{OrderState::return_open, 0.20}, SW{OrderState::store_cancelled, 0.20}}));
  out.push_back(make_nonflow(
      "affirmative", {"yes", "yes please", "ok yes", "sure", "yes that is right", "correct"},
      0.04,
      {SW{OrderState::in_transit, 0.28}, SW{OrderState::overdue, 0.10},
       SW{OrderState::store_cancelled, 0.32}, SW{OrderState::customer_cancelled, 0.30}}));

  // Generic order utterances: the utterance label stays generic while the
  // conversation label resolves by state. These carry the dialed
  // distinct-label mass.
  {
    Scenario s = make_fixed(
        "amb_my_order", "where_is_my_order",
        {"my order", "order help", "help with my order", "about my order",
         "i need help with an order", "an order question"},
        0.13,
        {SW{OrderState::return_open, 0.40, true}, SW{OrderState::delivered_missing, 0.35, true},
         SW{OrderState::store_cancelled, 0.25, true}},
        {{OrderState::return_open, "where_is_refund"},
         {OrderState::delivered_missing, "missing_items"},
         {OrderState::store_cancelled, "why_order_cancelled"}});
    s.filler_state = OrderState::in_transit;
    s.state_labels[OrderState::in_transit] = {"where_is_my_order", "where_is_my_order"};
    out.push_back(std::move(s));
  }
  {
    Scenario s = make_fixed(
        "amb_not_received", "where_is_my_order",
        {"not received", "i did not receive it", "did not get it", "nothing arrived",
         "i have not received", "it has not come"},
        0.11,
        {SW{OrderState::overdue, 0.05, true}, SW{OrderState::return_open, 0.45, true},
         SW{OrderState::delivered_missing, 0.35, true}},
        {{OrderState::overdue, "order_late"},
         {OrderState::return_open, "where_is_refund"},
         {OrderState::delivered_missing, "missing_items"}});
    s.filler_state = OrderState::in_transit;
    s.state_labels[OrderState::in_transit] = {"where_is_my_order", "where_is_my_order"};
    out.push_back(std::move(s));
  }

  // Ambiguous utterances whose utterance label itself depends on the order
  // state: these separate the context-aware models from the text-only
  // baseline.
  {
    Scenario s;
    s.name = "amb_cancelled";
    s.templates = {"order cancelled", "my order was cancelled", "order is cancelled",
                   "cancelled order", "about a cancelled order"};
    s.weight = 0.05;
    s.states = {SW{OrderState::store_cancelled, 0.5}, SW{OrderState::customer_cancelled, 0.5}};
    s.state_labels[OrderState::store_cancelled] = {"why_order_cancelled", "why_order_cancelled"};
    s.state_labels[OrderState::customer_cancelled] = {"cancel_order", "cancel_order"};
    s.contextless_labels = {"cancel_order", "cancel_order"};
    out.push_back(std::move(s));
  }
  {
    Scenario s;
    s.name = "amb_when_receive";
    s.templates = {"when will i receive the items", "when will i receive my items",
                   "when do i get my items", "when will it arrive", "when is it coming"};
    s.weight = 0.05;
    s.states = {SW{OrderState::overdue, 0.30}, SW{OrderState::in_transit, 0.70}};
    s.state_labels[OrderState::overdue] = {"order_late", "order_late"};
    s.state_labels[OrderState::in_transit] = {"where_is_my_order", "where_is_my_order"};
    s.contextless_labels = {"where_is_my_order", "where_is_my_order"};
    out.push_back(std::move(s));
  }

  {
    Scenario s;
    s.name = "amb_item_problem";
    s.templates = {"there is a problem with my items", "wrong items in my order",
                   "my items are not right", "issue with the items i received",
                   "the items look wrong"};
    s.weight = 0.04;
    s.states = {SW{OrderState::substituted, 0.5}, SW{OrderState::delivered_missing, 0.5}};
    s.state_labels[OrderState::substituted] = {"substitution_issue", "substitution_issue"};
    s.state_labels[OrderState::delivered_missing] = {"missing_items", "missing_items"};
    s.contextless_labels = {"missing_items", "missing_items"};
    out.push_back(std::move(s));
  }
  {
    Scenario s;
    s.name = "amb_money_back";
    s.templates = {"i want my money back", "money back please", "can i get my money back",
                   "about my money back request", "money back"};
    s.weight = 0.09;
    s.states = {SW{OrderState::return_open, 0.40, true}, SW{OrderState::overdue, 0.45, true},
                SW{OrderState::delivered_missing, 0.15}};
    s.state_labels[OrderState::return_open] = {"return_item", "where_is_refund"};
    s.state_labels[OrderState::overdue] = {"return_item", "where_is_refund"};
    s.state_labels[OrderState::delivered_missing] = {"return_item", "return_item"};
    s.filler_state = OrderState::in_transit;
    s.state_labels[OrderState::in_transit] = {"return_item", "return_item"};
    s.contextless_labels = {"return_item", "return_item"};
    out.push_back(std::move(s));
  }

  // Explicit flow utterances.
  {
    Scenario s = make_fixed("explicit_track", "where_is_my_order",
                            {"where is my order", "track my order", "track my package",
                             "order status please", "what is the status of my order",
                             "show me my order status"},
                            0.02,
                            {SW{OrderState::pre_ship, 0.2}, SW{OrderState::overdue, 0.2},
                             SW{OrderState::delivered_missing, 0.1, true}},
                            {{OrderState::delivered_missing, "missing_items"}});
    s.filler_state = OrderState::in_transit;
    s.state_labels[OrderState::in_transit] = {"where_is_my_order", "where_is_my_order"};
    out.push_back(std::move(s));
  }
  out.push_back(make_fixed("explicit_late", "order_late",
                           {"my order is late", "my order is delayed", "my delivery is late",
                            "the package is taking too long", "delivery is overdue",
                            "my order has not arrived on time"},
                           0.02, {SW{OrderState::overdue, 1.0}}));
  out.push_back(make_fixed("explicit_cancel", "cancel_order",
                           {"cancel my order", "i want to cancel my order",
                            "please cancel this order", "cancel the order now",
                            "i would like to cancel"},
                           0.06,
                           {SW{OrderState::pre_ship, 0.25}, SW{OrderState::in_transit, 0.15},
                            SW{OrderState::overdue, 0.60}}));
  out.push_back(make_fixed("explicit_why_cancelled", "why_order_cancelled",
                           {"why was my order cancelled", "why did you cancel my order",
                            "reason for order cancellation", "who cancelled my order",
                            "why is my order cancelled"},
                           0.03, {SW{OrderState::store_cancelled, 1.0}}));
  out.push_back(make_fixed("explicit_missing", "missing_items",
                           {"items are missing from my order", "my order is missing items",
                            "part of my order is missing", "i received an incomplete order",
                            "some items did not come"},
                           0.02, {SW{OrderState::delivered_missing, 1.0}}));
  out.push_back(make_fixed("explicit_return", "return_item",
                           {"i want to return an item", "how do i return an item",
                            "return this product", "start a return", "i need to return something"},
                           0.02,
                           {SW{OrderState::delivered_missing, 0.8}, SW{OrderState::return_open, 0.2}},
                           {{OrderState::return_open, "where_is_refund"}}));
  out.push_back(make_fixed("explicit_refund", "where_is_refund",
                           {"where is my refund", "refund status", "when will i get my refund",
                            "i have not received my refund yet", "refund not received"},
                           0.06,
                           {SW{OrderState::return_open, 0.22},
                            SW{OrderState::customer_cancelled, 0.08},
                            SW{OrderState::overdue, 0.70}}));
  out.push_back(make_fixed("explicit_substitution", "substitution_issue",
                           {"i got the wrong item", "this is a substituted item",
                            "you sent a different product", "wrong substitution",
                            "the item was substituted"},
                           0.02, {SW{OrderState::substituted, 1.0}}));
  return out;
}

}  // namespace

const std::vector<Scenario>& default_scenarios() {
  static const std::vector<Scenario> scenarios = build_default_scenarios();
  return scenarios;
}

const Scenario& find_scenario(const std::string& name) {
  for (const Scenario& s : default_scenarios()) {
    if (s.name == name) return s;
  }
  throw std::invalid_argument("unknown scenario: " + name);
}

IntentCatalog catalog_for(const std::vector<Scenario>& scenarios) {
  std::set<std::string> utterance, conversation;
  for (const Scenario& s : scenarios) {
    for (const auto& [_, labels] : s.state_labels) {
      utterance.insert(labels.utterance);
      conversation.insert(labels.conversation);
    }
    if (!s.requires_context) {
      utterance.insert(s.contextless_labels.utterance);
      conversation.insert(s.contextless_labels.conversation);
    }
  }
  IntentCatalog catalog;
  for (const std::string& name : kUtteranceMaster) {
    if (utterance.count(name)) catalog.utterance_intents.push_back(name);
  }
  for (const std::string& name : kFlowMaster) {
    if (conversation.count(name)) catalog.conversation_intents.push_back(name);
    if (utterance.count(name)) catalog.flow_intents.push_back(name);
  }
  catalog.validate();
  return catalog;
}

SplitStats compute_stats(const std::vector<LabeledExample>& examples) {
  SplitStats stats;
  stats.count = static_cast<int64_t>(examples.size());
  if (examples.empty()) return stats;
  int64_t with_context = 0, distinct = 0;
  for (const LabeledExample& e : examples) {
    with_context += e.transaction.has_value();
    distinct += e.utterance_label != e.conversation_label;
    ++stats.utterance_intent_counts[e.utterance_label];
    ++stats.conversation_intent_counts[e.conversation_label];
  }
  stats.context_fraction = static_cast<double>(with_context) / static_cast<double>(stats.count);
  stats.distinct_fraction = static_cast<double>(distinct) / static_cast<double>(stats.count);
  return stats;
}

namespace {

struct SolvedPlan {
  std::vector<Scenario> scenarios;  // weights renormalized (and possibly scaled)
  double context_prob = 0.0;        // for scenarios that allow absent context
  double distinct_dial = 0.0;
  double ctx_prob(const Scenario& s) const { return s.requires_context ? 1.0 : context_prob; }
  // Realized state weights after applying the dial.
  std::vector<std::pair<OrderState, double>> state_mix(const Scenario& s) const {
    std::vector<std::pair<OrderState, double>> mix;
    double used = 0.0;
    for (const auto& sw : s.states) {
      const double w = sw.dialed ? sw.weight * distinct_dial : sw.weight;
      if (w > 0.0) mix.emplace_back(sw.state, w);
      used += w;
    }
    if (used < 1.0 - 1e-12) mix.emplace_back(s.filler_state, 1.0 - used);
    return mix;
  }
};

[[noreturn]] void infeasible(const std::string& why) {
  throw std::invalid_argument("infeasible manifest: " + why);
}

SolvedPlan solve_plan(const DatasetManifest& manifest) {
  SolvedPlan plan;
  for (const Scenario& s : default_scenarios()) {
    if (manifest.scenario_filter.empty() ||
        std::find(manifest.scenario_filter.begin(), manifest.scenario_filter.end(), s.name) !=
            manifest.scenario_filter.end()) {
      plan.scenarios.push_back(s);
    }
  }
  if (plan.scenarios.empty()) infeasible("scenario filter selects nothing");

  const double c_target = manifest.context_fraction;
  if (c_target < 0.0 || c_target > 1.0) infeasible("context fraction outside [0,1]");
  if (manifest.distinct_fraction < 0.0 || manifest.distinct_fraction > 1.0) {
    infeasible("distinct fraction outside [0,1]");
  }
  if (manifest.noise_fraction < 0.0 || manifest.noise_fraction >= 0.5) {
    infeasible("noise fraction outside [0,0.5)");
  }

  double total = 0.0, required = 0.0;
  for (const Scenario& s : plan.scenarios) total += s.weight;
  for (Scenario& s : plan.scenarios) s.weight /= total;
  for (const Scenario& s : plan.scenarios) {
    if (s.requires_context) required += s.weight;
  }

  if (c_target >= required) {
    plan.context_prob = required < 1.0 ? (c_target - required) / (1.0 - required) : 1.0;
  } else {
    // Not enough context budget for the always-context families: shrink them
    // to exactly the budget and make everything else contextless.
    const double scale = required > 0.0 ? c_target / required : 0.0;
    double optional_total = 0.0;
    for (const Scenario& s : plan.scenarios) {
      if (!s.requires_context) optional_total += s.weight;
    }
    if (optional_total <= 0.0) infeasible("context fraction below the non-flow scenario mass");
    for (Scenario& s : plan.scenarios) {
      s.weight = s.requires_context ? s.weight * scale
                                    : s.weight * (1.0 - c_target) / optional_total;
    }
    plan.context_prob = 0.0;
    std::erase_if(plan.scenarios, [](const Scenario& s) { return s.weight <= 0.0; });
  }

  // Distinct-label mass: fixed part from non-dialed states, dialable part
  // from the marked states, solved to hit the post-noise target.
  double fixed = 0.0, dialable = 0.0;
  for (const Scenario& s : plan.scenarios) {
    const double cp = plan.ctx_prob(s);
    for (const auto& sw : s.states) {
      if (!s.is_distinct(sw.state)) continue;
      (sw.dialed ? dialable : fixed) += s.weight * cp * sw.weight;
    }
  }
  const double f = manifest.noise_fraction;
  const double d_pre = (manifest.distinct_fraction - f * c_target) / (1.0 - f);
  if (dialable <= 1e-12) {
    if (std::abs(d_pre - fixed) > 0.02) {
      infeasible("distinct fraction unreachable (no dialable scenarios selected)");
    }
    plan.distinct_dial = 0.0;
  } else {
    plan.distinct_dial = (d_pre - fixed) / dialable;
    if (plan.distinct_dial < -1e-9 || plan.distinct_dial > 1.0 + 1e-9) {
      std::ostringstream os;
      os << "distinct fraction " << manifest.distinct_fraction << " outside the reachable range ["
         << fixed * (1.0 - f) + f * c_target << ", "
         << (fixed + dialable) * (1.0 - f) + f * c_target << "]";
      infeasible(os.str());
    }
    plan.distinct_dial = std::clamp(plan.distinct_dial, 0.0, 1.0);
  }
  return plan;
}

// Integer allocation by largest remainder; entries capped when caps given.
std::vector<int64_t> allocate(const std::vector<double>& weights, int64_t total,
                              const std::vector<int64_t>* caps = nullptr) {
  const size_t n = weights.size();
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  std::vector<int64_t> counts(n, 0);
  if (wsum <= 0.0 || total <= 0) return counts;

  std::vector<double> exact(n);
  int64_t assigned = 0;
  for (size_t i = 0; i < n; ++i) {
    exact[i] = static_cast<double>(total) * weights[i] / wsum;
    counts[i] = static_cast<int64_t>(std::floor(exact[i]));
    if (caps) counts[i] = std::min(counts[i], (*caps)[i]);
    assigned += counts[i];
  }
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return exact[a] - std::floor(exact[a]) > exact[b] - std::floor(exact[b]);
  });
  size_t cursor = 0;
  while (assigned < total && cursor < 4 * n) {
    const size_t i = order[cursor % n];
    ++cursor;
    if (caps && counts[i] >= (*caps)[i]) continue;
    ++counts[i];
    ++assigned;
  }
  return counts;
}

struct BuiltSplit {
  std::vector<LabeledExample> examples;
  std::vector<int64_t> noise_indices;  // sorted positions in the final file order
};

BuiltSplit build_split(const SolvedPlan& plan, const IntentCatalog& catalog, int64_t count,
                       double noise_fraction, Rng rng) {
  BuiltSplit split;
  if (count <= 0) return split;

  std::vector<double> weights;
  weights.reserve(plan.scenarios.size());
  for (const Scenario& s : plan.scenarios) weights.push_back(s.weight);
  const std::vector<int64_t> per_scenario = allocate(weights, count);

  // Context examples are budgeted globally, then spread over the
  // optional-context scenarios, so the realized fraction stays within
  // rounding of the target even for small corpora.
  double expected_ctx = 0.0;
  for (size_t si = 0; si < plan.scenarios.size(); ++si) {
    expected_ctx += static_cast<double>(per_scenario[si]) * plan.ctx_prob(plan.scenarios[si]);
  }
  int64_t optional_budget = std::llround(expected_ctx);
  std::vector<double> optional_weights;
  std::vector<int64_t> optional_caps;
  for (size_t si = 0; si < plan.scenarios.size(); ++si) {
    if (plan.scenarios[si].requires_context) {
      optional_budget -= per_scenario[si];
    } else {
      optional_weights.push_back(static_cast<double>(per_scenario[si]) * plan.context_prob);
      optional_caps.push_back(per_scenario[si]);
    }
  }
  optional_budget = std::max<int64_t>(optional_budget, 0);
  const std::vector<int64_t> optional_ctx =
      allocate(optional_weights, optional_budget, &optional_caps);

  size_t optional_cursor = 0;
  for (size_t si = 0; si < plan.scenarios.size(); ++si) {
    const Scenario& s = plan.scenarios[si];
    const int64_t n_s = per_scenario[si];
    const int64_t ctx_count = s.requires_context ? n_s : optional_ctx[optional_cursor++];
    if (n_s == 0) continue;

    const auto mix = plan.state_mix(s);
    std::vector<double> state_weights;
    state_weights.reserve(mix.size());
    for (const auto& [_, w] : mix) state_weights.push_back(w);
    const std::vector<int64_t> per_state = allocate(state_weights, ctx_count);

    for (size_t mi = 0; mi < mix.size(); ++mi) {
      const OrderState state = mix[mi].first;
      const ScenarioLabels labels = s.state_labels.at(state);
      for (int64_t k = 0; k < per_state[mi]; ++k) {
        LabeledExample e;
        e.utterance = pick(s.templates, rng);
        e.transaction = sample_state_record(state, rng);
        e.utterance_label = labels.utterance;
        e.conversation_label = labels.conversation;
        split.examples.push_back(std::move(e));
      }
    }
    for (int64_t k = ctx_count; k < n_s; ++k) {
      LabeledExample e;
      e.utterance = pick(s.templates, rng);
      e.utterance_label = s.contextless_labels.utterance;
      e.conversation_label = s.contextless_labels.conversation;
      split.examples.push_back(std::move(e));
    }
  }

  rng.shuffle(split.examples);

  // Label noise: flipped examples are recorded so verification can tell
  // noise from corruption. Contextless flips move both labels together to
  // keep Y_c == Y_u.
  const int64_t noise_count =
      std::llround(noise_fraction * static_cast<double>(split.examples.size()));
  std::vector<int64_t> positions(split.examples.size());
  for (size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int64_t>(i);
  rng.shuffle(positions);
  const auto random_other = [&rng](const std::vector<std::string>& pool,
                                   const std::string& current) {
    std::string out = current;
    while (out == current) {
      out = pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))];
    }
    return out;
  };
  for (int64_t k = 0; k < noise_count; ++k) {
    LabeledExample& e = split.examples[static_cast<size_t>(positions[static_cast<size_t>(k)])];
    if (!e.transaction) {
      const std::string flipped = random_other(catalog.flow_intents, e.utterance_label);
      e.utterance_label = flipped;
      e.conversation_label = flipped;
    } else if (rng.uniform01() < 0.5) {
      e.utterance_label = random_other(catalog.utterance_intents, e.utterance_label);
    } else {
      e.conversation_label = random_other(catalog.conversation_intents, e.conversation_label);
    }
    split.noise_indices.push_back(positions[static_cast<size_t>(k)]);
  }
  std::sort(split.noise_indices.begin(), split.noise_indices.end());
  return split;
}

ordered_json stats_to_json(const SplitStats& stats) {
  ordered_json j;
  j["count"] = stats.count;
  j["context_fraction"] = stats.context_fraction;
  j["distinct_fraction"] = stats.distinct_fraction;
  j["utterance_intents"] = stats.utterance_intent_counts.size();
  j["conversation_intents"] = stats.conversation_intent_counts.size();
  return j;
}

}  // namespace

std::string GenerationReport::summary() const {
  std::ostringstream os;
  os << "generated " << combined.count << " examples (train " << train.count << ", validation "
     << validation.count << ", test " << test.count << ")\n"
     << "context fraction " << combined.context_fraction << ", distinct labels "
     << combined.distinct_fraction << "\n"
     << "utterance intents " << combined.utterance_intent_counts.size()
     << ", conversation intents " << combined.conversation_intent_counts.size() << "\n";
  return os.str();
}

GenerationReport generate_dataset(const DatasetManifest& manifest, const std::string& out_dir) {
  const SolvedPlan plan = solve_plan(manifest);
  const IntentCatalog catalog = catalog_for(plan.scenarios);
  if (manifest.utterance_intent_count > 0 &&
      static_cast<int>(catalog.utterance_intents.size()) != manifest.utterance_intent_count) {
    infeasible("scenario set covers " + std::to_string(catalog.utterance_intents.size()) +
               " utterance intents, manifest expects " +
               std::to_string(manifest.utterance_intent_count));
  }
  if (manifest.conversation_intent_count > 0 &&
      static_cast<int>(catalog.conversation_intents.size()) !=
          manifest.conversation_intent_count) {
    infeasible("scenario set covers " + std::to_string(catalog.conversation_intents.size()) +
               " conversation intents, manifest expects " +
               std::to_string(manifest.conversation_intent_count));
  }

  Rng root(manifest.seed);
  const BuiltSplit train =
      build_split(plan, catalog, manifest.train_count, manifest.noise_fraction, root.fork(1));
  const BuiltSplit validation =
      build_split(plan, catalog, manifest.validation_count, manifest.noise_fraction, root.fork(2));
  const BuiltSplit test =
      build_split(plan, catalog, manifest.test_count, manifest.noise_fraction, root.fork(3));

  GenerationReport report;
  report.solved_context_prob = plan.context_prob;
  report.solved_distinct_dial = plan.distinct_dial;
  report.train = compute_stats(train.examples);
  report.validation = compute_stats(validation.examples);
  report.test = compute_stats(test.examples);
  std::vector<LabeledExample> combined;
  combined.insert(combined.end(), train.examples.begin(), train.examples.end());
  combined.insert(combined.end(), validation.examples.begin(), validation.examples.end());
  combined.insert(combined.end(), test.examples.begin(), test.examples.end());
  report.combined = compute_stats(combined);

  if (std::abs(report.combined.context_fraction - manifest.context_fraction) > 0.02 ||
      std::abs(report.combined.distinct_fraction - manifest.distinct_fraction) > 0.02) {
    throw std::logic_error("generate_dataset: realized fractions drifted past 2 points");
  }

  save_examples_jsonl(out_dir + "/train.jsonl", train.examples);
  save_examples_jsonl(out_dir + "/validation.jsonl", validation.examples);
  save_examples_jsonl(out_dir + "/test.jsonl", test.examples);
  save_catalog_json(out_dir + "/catalog.json", catalog);

  ordered_json m;
  m["seed"] = manifest.seed;
  m["targets"] = {{"train_count", manifest.train_count},
                  {"validation_count", manifest.validation_count},
                  {"test_count", manifest.test_count},
                  {"context_fraction", manifest.context_fraction},
                  {"distinct_fraction", manifest.distinct_fraction},
                  {"noise_fraction", manifest.noise_fraction},
                  {"utterance_intent_count", manifest.utterance_intent_count},
                  {"conversation_intent_count", manifest.conversation_intent_count}};
  m["scenario_filter"] = manifest.scenario_filter;
  m["solver"] = {{"context_prob", plan.context_prob}, {"distinct_dial", plan.distinct_dial}};
  m["realized"] = {{"combined", stats_to_json(report.combined)},
                   {"train", stats_to_json(report.train)},
                   {"validation", stats_to_json(report.validation)},
                   {"test", stats_to_json(report.test)}};
  m["noise_indices"] = {{"train", train.noise_indices},
                        {"validation", validation.noise_indices},
                        {"test", test.noise_indices}};
  std::ofstream out(out_dir + "/manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest to " + out_dir);
  out << m.dump(2) << "\n";
  return report;
}

std::string VerifyReport::summary() const {
  std::ostringstream os;
  os << (ok ? "OK" : "FAILED") << ": " << combined.count << " examples, " << violations.size()
     << " label-rule violations, " << noisy_examples << " recorded noise flips\n"
     << "context fraction " << combined.context_fraction << ", distinct labels "
     << combined.distinct_fraction
     << (matches_manifest_targets ? " (within 2 points of targets)"
                                  : " (OUTSIDE 2 points of targets)")
     << "\n";
  for (size_t i = 0; i < violations.size() && i < 20; ++i) os << "  " << violations[i] << "\n";
  if (violations.size() > 20) os << "  ... " << violations.size() - 20 << " more\n";
  return os.str();
}

VerifyReport verify_dataset(const std::string& dir) {
  VerifyReport report;

  std::ifstream mf(dir + "/manifest.json");
  if (!mf) throw std::runtime_error("cannot open " + dir + "/manifest.json");
  const nlohmann::json manifest = nlohmann::json::parse(mf);

  std::vector<std::string> filter;
  if (manifest.contains("scenario_filter")) {
    filter = manifest.at("scenario_filter").get<std::vector<std::string>>();
  }
  std::vector<const Scenario*> scenarios;
  for (const Scenario& s : default_scenarios()) {
    if (filter.empty() || std::find(filter.begin(), filter.end(), s.name) != filter.end()) {
      scenarios.push_back(&s);
    }
  }

  std::map<std::string, std::vector<const Scenario*>> by_template;
  for (const Scenario* s : scenarios) {
    for (const std::string& t : s->templates) by_template[t].push_back(s);
  }

  std::vector<LabeledExample> combined;
  const char* split_names[] = {"train", "validation", "test"};
  for (const char* split : split_names) {
    const auto examples = load_examples_jsonl(dir + "/" + split + ".jsonl");
    std::set<int64_t> noise;
    if (manifest.contains("noise_indices") && manifest.at("noise_indices").contains(split)) {
      for (const auto& idx : manifest.at("noise_indices").at(split)) {
        noise.insert(idx.get<int64_t>());
      }
    }
    for (size_t i = 0; i < examples.size(); ++i) {
      const LabeledExample& e = examples[i];
      if (noise.count(static_cast<int64_t>(i))) {
        ++report.noisy_examples;
        continue;
      }
      const auto it = by_template.find(e.utterance);
      if (it == by_template.end()) {
        report.violations.push_back(std::string(split) + ":" + std::to_string(i) +
                                    ": utterance matches no scenario template: '" + e.utterance +
                                    "'");
        continue;
      }
      std::optional<RawFeatures> features;
      if (e.transaction) features = derive_raw_features(*e.transaction);
      bool matched = false;
      for (const Scenario* s : it->second) {
        try {
          const ScenarioLabels expect = s->labels_for(features);
          if (expect.utterance == e.utterance_label &&
              expect.conversation == e.conversation_label) {
            matched = true;
            break;
          }
        } catch (const std::invalid_argument&) {
          // scenario/state combination not covered; try the next candidate
        }
      }
      if (!matched) {
        report.violations.push_back(std::string(split) + ":" + std::to_string(i) +
                                    ": labels (" + e.utterance_label + ", " +
                                    e.conversation_label + ") disagree with the label rule for '" +
                                    e.utterance + "'");
      }
    }
    combined.insert(combined.end(), examples.begin(), examples.end());
  }

  report.combined = compute_stats(combined);
  const auto& targets = manifest.at("targets");
  report.matches_manifest_targets =
      std::abs(report.combined.context_fraction - targets.at("context_fraction").get<double>()) <=
          0.02 &&
      std::abs(report.combined.distinct_fraction - targets.at("distinct_fraction").get<double>()) <=
          0.02;
  report.ok = report.violations.empty();
  return report;
}

std::vector<LabeledExample> sample_scenario_examples(const std::string& scenario_name,
                                                     OrderState state, int n, uint64_t seed) {
  const Scenario& scenario = find_scenario(scenario_name);
  const auto it = scenario.state_labels.find(state);
  if (it == scenario.state_labels.end()) {
    throw std::invalid_argument("scenario " + scenario_name + " has no rule for state " +
                                order_state_name(state));
  }
  Rng rng(seed ^ 0xabcdef1234567ULL);
  std::vector<LabeledExample> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    LabeledExample e;
    e.utterance = pick(scenario.templates, rng);
    e.transaction = sample_state_record(state, rng);
    e.utterance_label = it->second.utterance;
    e.conversation_label = it->second.conversation;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace cnlu
