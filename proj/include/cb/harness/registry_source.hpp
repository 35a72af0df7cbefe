#pragma once

// ComponentSource backed by an in-process registry, as seen by one principal.

#include "cb/harness/harness.hpp"
#include "cb/registry/registry.hpp"

namespace cb {

class RegistrySource : public ComponentSource {
public:
    RegistrySource(const Registry& registry, std::string principal)
        : registry_(registry), principal_(std::move(principal)) {}

    Descriptor descriptor(const ComponentId& id) override { return registry_.describe(id, principal_).descriptor; }
    std::string payload(const ComponentId& id) override { return registry_.fetch(id, principal_).second; }

private:
    const Registry& registry_;
    std::string principal_;
};

}  // namespace cb
