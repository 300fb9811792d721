#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rpmem/memory_model.hpp"

namespace rpmem {

enum class Transport : std::uint8_t { InfiniBandRoCE, iWARP };
enum class Primitive : std::uint8_t { Write, WriteImm, Send };
enum class Arity : std::uint8_t { Singleton, Compound };

struct ServerConfig {
  PersistenceDomain domain = PersistenceDomain::DMP;
  bool ddio = true;
  Region rqwrb_region = Region::DRAM;
  Transport transport = Transport::InfiniBandRoCE;

  bool operator==(const ServerConfig&) const = default;
};

/// The twelve responder configurations: domain-major, then DDIO on/off,
/// then DRAM/PM receive buffers. Transport is left at its default.
std::vector<ServerConfig> enumerate_configs();

std::string to_string(Transport t);
std::string to_string(Primitive p);
std::string to_string(Arity a);
std::string describe(const ServerConfig& c);

// Lower-case command-line spellings; throw std::invalid_argument on anything else.
PersistenceDomain parse_domain(std::string_view s);
bool parse_on_off(std::string_view s);
Region parse_region(std::string_view s);
Primitive parse_primitive(std::string_view s);
Arity parse_arity(std::string_view s);
Transport parse_transport(std::string_view s);

std::string cli_name(PersistenceDomain d);
std::string cli_name(Region r);
std::string cli_name(Primitive p);
std::string cli_name(Arity a);
std::string cli_name(Transport t);

}  // namespace rpmem
