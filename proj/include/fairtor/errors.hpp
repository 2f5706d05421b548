#ifndef FAIRTOR_ERRORS_HPP
#define FAIRTOR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fairtor {

enum class ErrorCode {
    None,
    // crypto-core
    SubgroupError,
    AuthError,
    WitnessMismatch,
    // groupsig
    PowInvalid,
    ProofInvalid,
    DuplicateTag,
    NotInAllowedSet,
    NotFound,
    AlreadyRevoked,
    UnknownTag,
    // blindsig
    NonInvertible,
    UnknownEpoch,
    // handshake
    MinInstances,
    DecryptFailed,
    SigInvalid,
    CutAndChooseMismatch,
    StaleVersion,
    ConfirmMismatch,
    NoToken,
    TokenInvalid,
    TokenExpired,
    Replayed,
    // fairness
    Expired,
    SeqOutOfRange,
    VerifyFailed,
    DecryptMismatch,
    DleqInvalid,
    // simnet / files
    UnknownKind,
    ParseError,
    AssertFailed,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::None: return "None";
        case ErrorCode::SubgroupError: return "SubgroupError";
        case ErrorCode::AuthError: return "AuthError";
        case ErrorCode::WitnessMismatch: return "WitnessMismatch";
        case ErrorCode::PowInvalid: return "PowInvalid";
        case ErrorCode::ProofInvalid: return "ProofInvalid";
        case ErrorCode::DuplicateTag: return "DuplicateTag";
        case ErrorCode::NotInAllowedSet: return "NotInAllowedSet";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::AlreadyRevoked: return "AlreadyRevoked";
        case ErrorCode::UnknownTag: return "UnknownTag";
        case ErrorCode::NonInvertible: return "NonInvertible";
        case ErrorCode::UnknownEpoch: return "UnknownEpoch";
        case ErrorCode::MinInstances: return "MinInstances";
        case ErrorCode::DecryptFailed: return "DecryptFailed";
        case ErrorCode::SigInvalid: return "SigInvalid";
        case ErrorCode::CutAndChooseMismatch: return "CutAndChooseMismatch";
        case ErrorCode::StaleVersion: return "StaleVersion";
        case ErrorCode::ConfirmMismatch: return "ConfirmMismatch";
        case ErrorCode::NoToken: return "NoToken";
        case ErrorCode::TokenInvalid: return "TokenInvalid";
        case ErrorCode::TokenExpired: return "TokenExpired";
        case ErrorCode::Replayed: return "Replayed";
        case ErrorCode::Expired: return "Expired";
        case ErrorCode::SeqOutOfRange: return "SeqOutOfRange";
        case ErrorCode::VerifyFailed: return "VerifyFailed";
        case ErrorCode::DecryptMismatch: return "DecryptMismatch";
        case ErrorCode::DleqInvalid: return "DleqInvalid";
        case ErrorCode::UnknownKind: return "UnknownKind";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::AssertFailed: return "AssertFailed";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    explicit Error(ErrorCode code)
        : std::runtime_error(to_string(code)), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code) { throw Error(code); }
[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace fairtor

#endif
