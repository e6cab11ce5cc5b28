/* Minimal ECDSA verification over P-256 using a bignum library.
 * Returns 1 when the signature (r, s) verifies for digest e under pubkey Q.
 */
#include "bn.h"
#include "ec_p256.h"

int ecdsa_verify(const bn_t *e, const bn_t *r, const bn_t *s, const ec_point_t *Q) {
    bn_t w, u1, u2;
    ec_point_t P;

    /* w = s^-1 mod n */
    bn_mod_inverse(&w, s, &CURVE_N);

    /* u1 = e * w mod n, u2 = r * w mod n */
    bn_mod_mul(&u1, e, &w, &CURVE_N);
    bn_mod_mul(&u2, r, &w, &CURVE_N);

    /* P = u1 * G + u2 * Q */
    ec_shamir_trick(&P, &u1, &CURVE_G, &u2, Q);

    if (ec_point_is_infinity(&P)) {
        return 0;
    }

    /* accept when P.x == r (mod n) */
    bn_t px;
    bn_mod(&px, &P.x, &CURVE_N);
    return bn_cmp(&px, r) == 0;
}
