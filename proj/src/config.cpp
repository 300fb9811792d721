#include "rpmem/config.hpp"

#include <stdexcept>

namespace rpmem {

std::vector<ServerConfig> enumerate_configs() {
  std::vector<ServerConfig> out;
  for (auto d : {PersistenceDomain::DMP, PersistenceDomain::MHP, PersistenceDomain::WSP})
    for (bool ddio : {true, false})
      for (auto r : {Region::DRAM, Region::PM}) out.push_back(ServerConfig{d, ddio, r, Transport::InfiniBandRoCE});
  return out;
}

std::string to_string(Transport t) { return t == Transport::InfiniBandRoCE ? "IB/RoCE" : "iWARP"; }

std::string to_string(Primitive p) {
  switch (p) {
    case Primitive::Write: return "Write";
    case Primitive::WriteImm: return "WriteImm";
    case Primitive::Send: return "Send";
  }
  return "?";
}

std::string to_string(Arity a) { return a == Arity::Singleton ? "Singleton" : "Compound"; }

std::string describe(const ServerConfig& c) {
  return to_string(c.domain) + (c.ddio ? " DDIO " : " noDDIO ") + to_string(c.rqwrb_region) + "-RQWRB " +
         to_string(c.transport);
}

PersistenceDomain parse_domain(std::string_view s) {
  if (s == "dmp") return PersistenceDomain::DMP;
  if (s == "mhp") return PersistenceDomain::MHP;
  if (s == "wsp") return PersistenceDomain::WSP;
  throw std::invalid_argument("unknown domain '" + std::string(s) + "'");
}

bool parse_on_off(std::string_view s) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw std::invalid_argument("expected on|off, got '" + std::string(s) + "'");
}

Region parse_region(std::string_view s) {
  if (s == "dram") return Region::DRAM;
  if (s == "pm") return Region::PM;
  throw std::invalid_argument("unknown region '" + std::string(s) + "'");
}

Primitive parse_primitive(std::string_view s) {
  if (s == "write") return Primitive::Write;
  if (s == "writeimm" || s == "write-imm") return Primitive::WriteImm;
  if (s == "send") return Primitive::Send;
  throw std::invalid_argument("unknown primitive '" + std::string(s) + "'");
}

Arity parse_arity(std::string_view s) {
  if (s == "singleton") return Arity::Singleton;
  if (s == "compound") return Arity::Compound;
  throw std::invalid_argument("unknown arity '" + std::string(s) + "'");
}

Transport parse_transport(std::string_view s) {
  if (s == "ib" || s == "roce") return Transport::InfiniBandRoCE;
  if (s == "iwarp") return Transport::iWARP;
  throw std::invalid_argument("unknown transport '" + std::string(s) + "'");
}

std::string cli_name(PersistenceDomain d) {
  switch (d) {
    case PersistenceDomain::DMP: return "dmp";
    case PersistenceDomain::MHP: return "mhp";
    case PersistenceDomain::WSP: return "wsp";
  }
  return "?";
}
std::string cli_name(Region r) { return r == Region::DRAM ? "dram" : "pm"; }
std::string cli_name(Primitive p) {
  switch (p) {
    case Primitive::Write: return "write";
    case Primitive::WriteImm: return "writeimm";
    case Primitive::Send: return "send";
  }
  return "?";
}
std::string cli_name(Arity a) { return a == Arity::Singleton ? "singleton" : "compound"; }
std::string cli_name(Transport t) { return t == Transport::InfiniBandRoCE ? "ib" : "iwarp"; }

}  // namespace rpmem
