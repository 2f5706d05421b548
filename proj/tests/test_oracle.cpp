#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <gmpxx.h>

#include <random>

#include "oracle.hpp"

TEST_CASE("powmod against hand-computed values") {
    CHECK(oracle::powmod(4, 5, 23) == 12);
    CHECK(oracle::powmod(9, 11, 23) == 1);
    CHECK(oracle::powmod(2, 11, 23) == 1);
    CHECK(oracle::powmod(14, 107, 187) == 163);
    CHECK(oracle::powmod(70, 3, 187) == 42);
    CHECK(oracle::powmod(163, 3, 187) == 14);
    CHECK(oracle::powmod(2, 0, 23) == 1);
    CHECK(oracle::powmod(0, 5, 23) == 0);
}

TEST_CASE("modinv against hand-computed values") {
    CHECK(oracle::modinv(3, 160) == 107);
    CHECK(oracle::modinv(5, 187) == 75);
    CHECK(oracle::modinv(11, 22) == 0);  // gcd 11, no inverse
    for (std::uint64_t u = 1; u < 23; ++u) {
        std::uint64_t inv = oracle::modinv(u, 23);
        REQUIRE(inv != 0);
        CHECK(oracle::mulmod(u, inv, 23) == 1);
    }
}

TEST_CASE("dlog by exhaustive scan") {
    CHECK(oracle::dlog(4, 12, 23, 11) == 5);
    CHECK(oracle::dlog(9, 8, 23, 11) == 5);
    CHECK(oracle::dlog(9, 1, 23, 11) == 0);
    CHECK(oracle::dlog(4, 5, 23, 11) == -1);  // 5 is outside the subgroup
}

TEST_CASE("u64 helpers match gmp on random inputs") {
    std::mt19937_64 gen(7);
    for (int i = 0; i < 200; ++i) {
        std::uint64_t m = gen() % 0xFFFFFFFFULL + 2;
        std::uint64_t a = gen() % m;
        std::uint64_t b = gen() % m;
        std::uint64_t e = gen() % 0xFFFF;
        mpz_class zm(static_cast<unsigned long>(m));
        mpz_class za(static_cast<unsigned long>(a));
        mpz_class zb(static_cast<unsigned long>(b));

        mpz_class prod = za * zb % zm;
        CHECK(oracle::mulmod(a, b, m) == prod.get_ui());

        mpz_class pw;
        mpz_powm_ui(pw.get_mpz_t(), za.get_mpz_t(), static_cast<unsigned long>(e),
                    zm.get_mpz_t());
        CHECK(oracle::powmod(a, e, m) == pw.get_ui());

        mpz_class g;
        mpz_gcd(g.get_mpz_t(), za.get_mpz_t(), zm.get_mpz_t());
        CHECK(oracle::gcd(a, m) == g.get_ui());

        mpz_class inv;
        int has = mpz_invert(inv.get_mpz_t(), za.get_mpz_t(), zm.get_mpz_t());
        if (has) {
            CHECK(oracle::modinv(a, m) == inv.get_ui());
        } else {
            CHECK(oracle::modinv(a, m) == 0);
        }
    }
}
