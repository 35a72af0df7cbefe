#pragma once

// Clients that mint persistent public identifiers for published subjects.

#include <atomic>
#include <memory>
#include <string>
#include <vector>

namespace cb {

struct DepositionRequest {
    std::string subject;  // run id or name@version
    std::string title;
    std::vector<std::string> creators;
    std::string description;
};

class Registrar {
public:
    virtual ~Registrar() = default;

    /// Returns the minted identifier; throws Error(RegistrarUnavailable) on failure.
    virtual std::string mint(const DepositionRequest& request) = 0;
    virtual std::string name() const = 0;
};

/// Deterministic offline registrar: `10.70000/cb.` + first 12 hex of sha256(subject).
class LocalSimRegistrar : public Registrar {
public:
    std::string mint(const DepositionRequest& request) override;
    std::string name() const override { return "local-sim"; }

    /// Simulates an outage; mint() throws while unavailable.
    void set_available(bool available) { available_ = available; }

private:
    std::atomic<bool> available_{true};
};

/// Zenodo-style deposition client: POST {base}/api/deposit/depositions with
/// {"metadata":{title, creators:[{name}], description, upload_type}} and a
/// bearer token; the identifier is read from `doi` or
/// `metadata.prereserve_doi.doi` of the JSON response.
class ZenodoSandboxRegistrar : public Registrar {
public:
    ZenodoSandboxRegistrar(std::string base_url, std::string access_token);

    std::string mint(const DepositionRequest& request) override;
    std::string name() const override { return "zenodo-sandbox"; }

private:
    std::string base_url_;
    std::string token_;
};

/// "sim" (default) or "zenodo-sandbox"; the latter reads CB_ZENODO_URL and CB_ZENODO_TOKEN.
std::shared_ptr<Registrar> make_registrar(const std::string& kind);

}  // namespace cb
