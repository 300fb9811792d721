#include "rpmem/recipe.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "rpmem/log_record.hpp"

namespace rpmem {

std::string to_string(OpKind k) {
  switch (k) {
    case OpKind::Write: return "Write";
    case OpKind::WriteImm: return "WriteImm";
    case OpKind::Send: return "Send";
    case OpKind::Read: return "Read";
    case OpKind::Flush: return "Flush";
    case OpKind::WriteAtomic: return "Write_atomic";
  }
  return "?";
}

const ValueDecl& Recipe::value(const std::string& name) const {
  for (const auto& v : values)
    if (v.name == name) return v;
  throw RecipeError("recipe " + id + " declares no value '" + name + "'");
}

namespace {

Bytes pattern(std::size_t n, std::uint8_t seed) {
  Bytes out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::uint8_t>(seed + 7 * i);
  return out;
}

}  // namespace

void install_workload(Recipe& recipe, const Workload& w) {
  Bytes first = encode_record(pattern(8, 0x31));
  std::uint32_t append_at = w.log_base + static_cast<std::uint32_t>(first.size());
  Bytes appended = encode_record(pattern(w.append_payload, 0x52));
  if (append_at + appended.size() > w.log_base + w.log_capacity) throw RecipeError("workload log too small");

  recipe.values.clear();
  recipe.initial_pm.clear();
  auto first_words = to_words(first);
  for (std::size_t i = 0; i < first_words.size(); ++i)
    recipe.initial_pm.emplace_back(w.log_base + static_cast<std::uint32_t>(i * kUnitBytes), first_words[i]);

  ValueDecl a{"a", Address{Region::PM, append_at}, {}, to_words(appended)};
  a.old_words.assign(a.new_words.size(), 0);
  recipe.values.push_back(a);
  if (recipe.arity == Arity::Compound) {
    recipe.values.push_back(ValueDecl{"b", Address{Region::PM, w.tail_index}, {Word(first.size())},
                                      {Word(first.size() + appended.size())}});
  }
}

Step rq_post(OpKind kind, std::vector<std::string> values, bool address_only) {
  Step s;
  s.actor = Actor::Requester;
  s.action = Action::Post;
  s.post.kind = kind;
  s.post.values = std::move(values);
  s.post.address_only = address_only;
  return s;
}

Step rq_wait_completion(int ref) {
  Step s;
  s.actor = Actor::Requester;
  s.action = Action::WaitCompletion;
  s.ref = ref;
  return s;
}

Step rsp_receive(std::vector<std::string> values, bool address_only) {
  Step s;
  s.actor = Actor::Responder;
  s.action = Action::WaitReceive;
  s.values = std::move(values);
  s.address_only = address_only;
  return s;
}

Step rsp_copy(std::vector<std::string> values) {
  Step s;
  s.actor = Actor::Responder;
  s.action = Action::CopyToTarget;
  s.values = std::move(values);
  return s;
}

Step rsp_flush(std::vector<std::string> values) {
  Step s;
  s.actor = Actor::Responder;
  s.action = Action::LocalFlush;
  s.values = std::move(values);
  return s;
}

Step rsp_ack() {
  Step s;
  s.actor = Actor::Responder;
  s.action = Action::PostAck;
  return s;
}

Step rq_receive_ack() {
  Step s;
  s.actor = Actor::Requester;
  s.action = Action::WaitAck;
  return s;
}

Step assert_persisted(std::vector<std::string> values) {
  Step s;
  s.actor = Actor::Requester;
  s.action = Action::AssertPersisted;
  s.values = std::move(values);
  return s;
}

namespace {

std::string join(const std::vector<std::string>& names, bool address_of) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ",";
    if (address_of) out += "&";
    out += names[i];
  }
  return out;
}

std::string post_text(const PostSpec& p) {
  if (p.kind == OpKind::Flush || p.kind == OpKind::Read) return to_string(p.kind);
  return to_string(p.kind) + "(" + join(p.values, p.address_only) + ")";
}

bool referenced_by_wait(const Recipe& r, std::size_t post_index) {
  for (const auto& s : r.steps)
    if (s.action == Action::WaitCompletion && s.ref == static_cast<int>(post_index)) return true;
  return false;
}

int latest_matching_post(const std::vector<Step>& steps, std::size_t before, const std::string& text) {
  for (std::size_t i = before; i-- > 0;) {
    if (steps[i].action == Action::Post && post_text(steps[i].post) == text) return static_cast<int>(i);
  }
  return -1;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

// "name(x,y)" -> ("name", ["x","y"]); names without parentheses get no args.
std::pair<std::string, std::vector<std::string>> split_call(const std::string& s) {
  auto open = s.find('(');
  if (open == std::string::npos) return {s, {}};
  if (s.back() != ')') throw RecipeError("malformed step '" + s + "'");
  std::vector<std::string> args;
  std::string inner = s.substr(open + 1, s.size() - open - 2);
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) args.push_back(trim(item));
  return {s.substr(0, open), args};
}

std::pair<std::vector<std::string>, bool> strip_address_of(const std::vector<std::string>& args,
                                                           const std::string& line) {
  std::vector<std::string> names;
  int amp = 0;
  for (const auto& a : args) {
    if (!a.empty() && a[0] == '&') {
      ++amp;
      names.push_back(a.substr(1));
    } else {
      names.push_back(a);
    }
  }
  if (amp != 0 && amp != static_cast<int>(args.size())) throw RecipeError("mixed &-arguments in '" + line + "'");
  for (const auto& n : names)
    if (n.empty()) throw RecipeError("empty argument in '" + line + "'");
  return {names, amp != 0};
}

OpKind parse_op(const std::string& name, const std::string& line) {
  if (name == "Write") return OpKind::Write;
  if (name == "WriteImm") return OpKind::WriteImm;
  if (name == "Send") return OpKind::Send;
  if (name == "Read") return OpKind::Read;
  if (name == "Flush") return OpKind::Flush;
  if (name == "Write_atomic") return OpKind::WriteAtomic;
  throw RecipeError("unknown operation in '" + line + "'");
}

}  // namespace

std::string format_step(const Recipe& recipe, std::size_t index) {
  const Step& s = recipe.steps.at(index);
  switch (s.action) {
    case Action::Post: {
      std::string out = "Rq " + post_text(s.post);
      if (s.post.fenced) out += " [fence]";
      if (s.post.signaled && !referenced_by_wait(recipe, index)) out += " [signaled]";
      return out;
    }
    case Action::WaitCompletion: {
      if (s.ref < 0 || static_cast<std::size_t>(s.ref) >= recipe.steps.size()) return "Rq Comp_? @" + std::to_string(s.ref);
      std::string text = post_text(recipe.steps[s.ref].post);
      std::string out = "Rq Comp_" + text;
      if (latest_matching_post(recipe.steps, index, text) != s.ref) out += " @" + std::to_string(s.ref);
      return out;
    }
    case Action::WaitReceive: return "Rsp Receive(" + join(s.values, s.address_only) + ")";
    case Action::CopyToTarget: return "Rsp copy(" + join(s.values, false) + ")";
    case Action::LocalFlush: return "Rsp flush(" + join(s.values, true) + ")";
    case Action::PostAck: return "Rsp Send(ack)";
    case Action::WaitAck: return "Rq Receive(ack)";
    case Action::AssertPersisted: return "ASSERT-PERSISTED(" + join(s.values, false) + ")";
  }
  return "?";
}

std::string format_recipe(const Recipe& recipe) {
  std::string out;
  for (std::size_t i = 0; i < recipe.steps.size(); ++i) out += format_step(recipe, i) + "\n";
  return out;
}

std::vector<Step> parse_steps(const std::string& text) {
  std::vector<Step> steps;
  std::stringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    std::string line = trim(raw);
    if (line.empty()) continue;
    bool fenced = false, signaled = false;
    for (;;) {
      if (line.size() > 8 && line.substr(line.size() - 8) == " [fence]") {
        fenced = true;
        line = trim(line.substr(0, line.size() - 8));
      } else if (line.size() > 11 && line.substr(line.size() - 11) == " [signaled]") {
        signaled = true;
        line = trim(line.substr(0, line.size() - 11));
      } else {
        break;
      }
    }
    if (starts_with(line, "ASSERT-PERSISTED")) {
      auto [name, args] = split_call(line);
      if (name != "ASSERT-PERSISTED") throw RecipeError("malformed step '" + line + "'");
      steps.push_back(assert_persisted(args));
    } else if (starts_with(line, "Rq Comp_")) {
      std::string rest = line.substr(8);
      int ref = -1;
      auto at = rest.find(" @");
      if (at != std::string::npos) {
        try {
          ref = std::stoi(rest.substr(at + 2));
        } catch (const std::exception&) {
          throw RecipeError("bad step reference in '" + line + "'");
        }
        rest = trim(rest.substr(0, at));
      } else {
        ref = latest_matching_post(steps, steps.size(), rest);
        if (ref < 0) throw RecipeError("no earlier post matches '" + line + "'");
      }
      if (ref < 0 || static_cast<std::size_t>(ref) >= steps.size()) throw RecipeError("dangling reference in '" + line + "'");
      steps[ref].post.signaled = true;
      steps.push_back(rq_wait_completion(ref));
    } else if (line == "Rq Receive(ack)") {
      steps.push_back(rq_receive_ack());
    } else if (line == "Rsp Send(ack)") {
      steps.push_back(rsp_ack());
    } else if (starts_with(line, "Rq ")) {
      auto [name, args] = split_call(line.substr(3));
      OpKind kind = parse_op(name, line);
      auto [names, addr] = strip_address_of(args, line);
      Step s = rq_post(kind, names, addr);
      s.post.fenced = fenced;
      s.post.signaled = signaled;
      steps.push_back(s);
      continue;
    } else if (starts_with(line, "Rsp ")) {
      auto [name, args] = split_call(line.substr(4));
      auto [names, addr] = strip_address_of(args, line);
      if (name == "Receive") {
        steps.push_back(rsp_receive(names, addr));
      } else if (name == "copy" && !addr) {
        steps.push_back(rsp_copy(names));
      } else if (name == "flush" && addr) {
        steps.push_back(rsp_flush(names));
      } else {
        throw RecipeError("unknown responder step '" + line + "'");
      }
    } else {
      throw RecipeError("unknown step '" + line + "'");
    }
    if (fenced || signaled) throw RecipeError("annotation on a non-post step '" + line + "'");
  }
  return steps;
}

std::vector<std::string> validate_recipe(const Recipe& r) {
  std::vector<std::string> diag;
  auto where = [](std::size_t i) { return "step " + std::to_string(i) + ": "; };
  std::set<std::string> declared;
  for (const auto& v : r.values) declared.insert(v.name);
  auto check_names = [&](std::size_t i, const std::vector<std::string>& names) {
    if (declared.empty()) return;
    for (const auto& n : names)
      if (!declared.count(n)) diag.push_back(where(i) + "undeclared value '" + n + "'");
  };

  std::size_t asserts = 0, post_acks = 0, wait_acks = 0, inbound = 0, receives = 0;
  std::set<std::string> received, mentioned;
  for (std::size_t i = 0; i < r.steps.size(); ++i) {
    const Step& s = r.steps[i];
    bool requester_action = s.action == Action::Post || s.action == Action::WaitCompletion ||
                            s.action == Action::WaitAck || s.action == Action::AssertPersisted;
    if (requester_action != (s.actor == Actor::Requester)) diag.push_back(where(i) + "action performed by the wrong side");
    switch (s.action) {
      case Action::Post: {
        const PostSpec& p = s.post;
        check_names(i, p.values);
        for (const auto& n : p.values) mentioned.insert(n);
        bool needs_one = p.kind == OpKind::Write || p.kind == OpKind::WriteImm || p.kind == OpKind::WriteAtomic;
        if (needs_one && p.values.size() != 1) diag.push_back(where(i) + to_string(p.kind) + " takes exactly one value");
        if (p.kind == OpKind::Send && p.values.empty()) diag.push_back(where(i) + "Send without a value");
        if ((p.kind == OpKind::Flush || p.kind == OpKind::Read) && !p.values.empty())
          diag.push_back(where(i) + to_string(p.kind) + " takes no value");
        if (p.address_only && p.kind != OpKind::Send) diag.push_back(where(i) + "only Send may carry an address alone");
        if (p.kind == OpKind::WriteAtomic && p.values.size() == 1 && declared.count(p.values[0]) &&
            r.value(p.values[0]).new_words.size() * kUnitBytes > 8)
          diag.push_back(where(i) + "Write_atomic payload exceeds 8 bytes");
        if (consumes_receive(p.kind)) ++inbound;
        break;
      }
      case Action::WaitCompletion: {
        if (s.ref < 0 || static_cast<std::size_t>(s.ref) >= i) {
          diag.push_back(where(i) + "completion wait on a missing request");
        } else if (r.steps[s.ref].action != Action::Post) {
          diag.push_back(where(i) + "completion wait on a non-post step");
        } else if (!r.steps[s.ref].post.signaled) {
          diag.push_back(where(i) + "completion wait on an unsignaled request");
        }
        break;
      }
      case Action::WaitReceive:
        check_names(i, s.values);
        ++receives;
        if (receives > inbound) diag.push_back(where(i) + "receive without a matching inbound message");
        if (!s.address_only) received.insert(s.values.begin(), s.values.end());
        break;
      case Action::CopyToTarget:
        check_names(i, s.values);
        for (const auto& n : s.values)
          if (!received.count(n)) diag.push_back(where(i) + "copy of '" + n + "' before it was received");
        break;
      case Action::LocalFlush:
        check_names(i, s.values);
        if (s.values.empty()) diag.push_back(where(i) + "flush of an empty range");
        break;
      case Action::PostAck: ++post_acks; break;
      case Action::WaitAck: ++wait_acks; break;
      case Action::AssertPersisted:
        ++asserts;
        check_names(i, s.values);
        if (i + 1 != r.steps.size()) diag.push_back(where(i) + "ASSERT-PERSISTED is not the final step");
        break;
    }
  }
  if (wait_acks > post_acks) diag.push_back("ack wait without a matching responder ack");
  if (asserts != 1) diag.push_back("expected exactly one ASSERT-PERSISTED, found " + std::to_string(asserts));
  if (r.arity == Arity::Compound) {
    for (const char* n : {"a", "b"}) {
      bool asserted = !r.steps.empty() && r.steps.back().action == Action::AssertPersisted &&
                      std::count(r.steps.back().values.begin(), r.steps.back().values.end(), n);
      if (!mentioned.count(n) || !asserted) diag.push_back(std::string("compound recipe does not cover value ") + n);
    }
  }
  return diag;
}

std::string to_string(const Mutation& m) {
  const char* k = "";
  switch (m.kind) {
    case Mutation::Kind::DropStep: k = "DropStep"; break;
    case Mutation::Kind::UnfenceOrDeAtomize: k = "UnfenceOrDeAtomize"; break;
    case Mutation::Kind::SkipWait: k = "SkipWait"; break;
    case Mutation::Kind::ReorderAdjacent: k = "ReorderAdjacent"; break;
  }
  return std::string(k) + "(" + std::to_string(m.index) + ")";
}

namespace {

// Removes step j, retargeting completion waits on it to the nearest earlier
// requester post.
void erase_step(std::vector<Step>& steps, std::size_t j) {
  bool was_post = steps[j].action == Action::Post;
  int replacement = -1;
  if (was_post) {
    for (std::size_t i = j; i-- > 0;)
      if (steps[i].action == Action::Post) {
        replacement = static_cast<int>(i);
        break;
      }
  }
  steps.erase(steps.begin() + static_cast<std::ptrdiff_t>(j));
  std::vector<std::size_t> orphaned;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    Step& s = steps[i];
    if (s.action != Action::WaitCompletion) continue;
    if (s.ref == static_cast<int>(j)) {
      if (replacement < 0) {
        orphaned.push_back(i);
      } else {
        s.ref = replacement;
        steps[replacement].post.signaled = true;
      }
    } else if (s.ref > static_cast<int>(j)) {
      --s.ref;
    }
  }
  for (auto it = orphaned.rbegin(); it != orphaned.rend(); ++it) erase_step(steps, *it);
}

std::size_t nth_index(const std::vector<Step>& steps, Action a, std::size_t n) {
  for (std::size_t i = 0; i < steps.size(); ++i)
    if (steps[i].action == a && n-- == 0) return i;
  return steps.size();
}

std::size_t ordinal(const std::vector<Step>& steps, std::size_t j) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < j; ++i)
    if (steps[i].action == steps[j].action) ++n;
  return n;
}

}  // namespace

Recipe mutate(const Recipe& recipe, const Mutation& m) {
  Recipe out = recipe;
  auto& steps = out.steps;
  if (m.index >= steps.size()) throw RecipeError("mutation index out of range: " + to_string(m));
  const Step target = steps[m.index];
  switch (m.kind) {
    case Mutation::Kind::DropStep: {
      if (target.action == Action::AssertPersisted) throw RecipeError("cannot drop the ASSERT-PERSISTED marker");
      if (target.action == Action::PostAck) {
        std::size_t wait = nth_index(steps, Action::WaitAck, ordinal(steps, m.index));
        if (wait < steps.size()) erase_step(steps, wait);
      }
      erase_step(steps, m.index);
      break;
    }
    case Mutation::Kind::UnfenceOrDeAtomize: {
      if (target.action != Action::Post) throw RecipeError("not a post: " + to_string(m));
      if (target.post.fenced) {
        steps[m.index].post.fenced = false;
      } else if (target.post.kind == OpKind::WriteAtomic) {
        steps[m.index].post.kind = OpKind::Write;
      } else {
        throw RecipeError("post is neither fenced nor atomic: " + to_string(m));
      }
      break;
    }
    case Mutation::Kind::SkipWait: {
      if (target.action != Action::WaitCompletion && target.action != Action::WaitAck &&
          target.action != Action::WaitReceive)
        throw RecipeError("not a wait: " + to_string(m));
      erase_step(steps, m.index);
      break;
    }
    case Mutation::Kind::ReorderAdjacent: {
      std::size_t i = m.index;
      if (i + 1 >= steps.size()) throw RecipeError("no successor to swap with: " + to_string(m));
      std::swap(steps[i], steps[i + 1]);
      for (auto& s : steps) {
        if (s.action != Action::WaitCompletion) continue;
        if (s.ref == static_cast<int>(i)) s.ref = static_cast<int>(i + 1);
        else if (s.ref == static_cast<int>(i + 1)) s.ref = static_cast<int>(i);
      }
      break;
    }
  }
  auto diag = validate_recipe(out);
  if (!diag.empty()) throw RecipeError(to_string(m) + " yields an invalid recipe: " + diag.front());
  return out;
}

std::vector<Mutation> valid_mutations(const Recipe& recipe) {
  std::vector<Mutation> out;
  for (auto kind : {Mutation::Kind::DropStep, Mutation::Kind::UnfenceOrDeAtomize, Mutation::Kind::SkipWait,
                    Mutation::Kind::ReorderAdjacent}) {
    for (std::size_t i = 0; i < recipe.steps.size(); ++i) {
      try {
        mutate(recipe, Mutation{kind, i});
        out.push_back(Mutation{kind, i});
      } catch (const RecipeError&) {
      }
    }
  }
  return out;
}

}  // namespace rpmem
