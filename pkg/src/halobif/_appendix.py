"""Closed-form small mass ratio expansions of the first-order coefficients.

L1/L2 coefficients multiply ``mu^(j/3)``, L3 coefficients multiply ``mu^j``,
``j = 0..3``.  Four printed closed forms disagree with both their own decimal
expansions and the computed normal form; they are replaced by the symmetric
counterpart noted inline (odd powers of ``mu^(1/3)`` flip sign between L1
and L2, even powers coincide).
"""

from math import sqrt

_S7 = sqrt(7.0)
_C3 = 3 ** (1 / 3)
_K1 = 3 ** (2 / 3) * 14 ** (1 / 3)
_K2 = 3 ** (1 / 3) * 14 ** (2 / 3)

_TAU1_L2 = ((11459544 * sqrt(3) * (-9800 + 12771 * _S7)
             - sqrt(7 * (514623902740673071495 + 449268874694104189382 * _S7)))
            / (2518593859712 * 3 ** (5 / 6)))
_SIGMA2 = (-sqrt(-(449909592683863331 / 7) + 46284461373137666 * _S7)
           / (458903424 * 3 ** (1 / 6)))
_TAU2 = (-(27 * (2468130674602081363 - 1313792742465604742 * _S7) * sqrt(1 + 2 * _S7))
         / (686797152843693394944 * 3 ** (1 / 6))
         - (5528 * (203 * (17991621401387 - 4467226286908 * _S7) * sqrt(85 + 62 * _S7)
                    + 77351922 * sqrt(3) * (-45133312 + 6427123 * _S7)))
         / (686797152843693394944 * 3 ** (1 / 6)))
_SIGMA0 = 3 / 116 * sqrt(3 / 7 * (-383 + 146 * _S7))
_TAU0 = (24876 * (-7 + 5 * _S7) - sqrt(-690114225129 + 401295726258 * _S7)) / 4488736
_ALPHA0 = (430 - 1561 * _S7) / 38696
_ALPHA2 = (7615912047925 - 15138513232696 * _S7) / (65185461649728 * _C3**2)
_DELTA0 = -2 + sqrt(-1 + 2 * _S7)
_DELTA1 = (63 * (-5 + 7 * _S7) - sqrt(42 * (8366 + 3367 * _S7))) ** (1 / 3) / 14 ** (2 / 3)
_DELTA2 = (-1127 + 2 * sqrt(-164668 + 177086 * _S7)) / (784 * _C3**2)

COEFFICIENTS = {
    "L1": {
        "alpha": (_ALPHA0,
                  (403681129 - 710133214 * _S7) / (4492141248 * _C3),
                  _ALPHA2,
                  (215057379347641787 - 579355824477908807 * _S7) / 11350874807990436096),
        "beta": (-9 / 116, -5969 * _C3**2 / 53824, -1595507 / (3121792 * _C3**2),
                 -54403463 / 543191808),
        "sigma": (_SIGMA0,
                  -3 ** (1 / 6) * (6769553 - 1082463 * _S7) * sqrt(163 + 554 * _S7) / 554508304,
                  _SIGMA2,
                  -sqrt(-(13566178178821726882825 / 7) + (2168079445680944572231 * _S7) / 2)
                  / 186314790144),
        # printed tau_1 evaluates to -0.0757; the L2 form with flipped sign gives -0.0583243
        "tau": (_TAU0, -_TAU1_L2, _TAU2,
                (4279772896 + 13509602135 * _S7) / 652101765504
                - sqrt(-1831253762265104918553131340897210768586201172585 / 21
                       + 418836965618388593658800818441465281265686267626 * _S7 / 3)
                / 6116768064815454196125696),
        "delta": (_DELTA0, -_DELTA1, _DELTA2,
                  271 / 576 - sqrt(-(64736369 / 21) + (12691777 * _S7 / 6)) / 3528),
        "omega_z": (2.0, _C3**2 / 2, 23 / (16 * _C3**2), -271 / 576),
    },
    "L2": {
        "alpha": (_ALPHA0,
                  (-403681129 + 710133214 * _S7) / (4492141248 * _C3),
                  _ALPHA2,
                  (40926888746031829 + 399917417520057479 * _S7) / 11350874807990436096),
        "beta": (-9 / 116, 5969 * _C3**2 / 53824, -1595507 / (3121792 * _C3**2),
                 62154119 / 543191808),
        # printed sigma_1 has the wrong sign; printed sigma_2 and tau_2 differ from L1's,
        # whose forms match the decimals
        "sigma": (_SIGMA0,
                  3 ** (1 / 6) * sqrt(-67904593148 + 38942326934 * _S7) / 659344,
                  _SIGMA2,
                  sqrt(14 * (-28252063020622261270706 + 17893665708209519504017 * _S7))
                  / 2608407062016),
        "tau": (_TAU0, _TAU1_L2, _TAU2,
                (372558368 + 290138113 * _S7) / 652101765504
                + sqrt(-5908980415228982864846540204241770944533372591017 / 21
                       + 320636313928575557216801412344520038042793561962 * _S7 / 3)
                / 6116768064815454196125696),
        "delta": (_DELTA0, _DELTA1, _DELTA2,
                  593 / 576 - sqrt(-187748909 / 21 + 49407673 * _S7 / 6) / 3528),
        "omega_z": (2.0, -_C3**2 / 2, 23 / (16 * _C3**2), -593 / 576),
    },
    "L3": {
        "alpha": (0.0, -67 / 128, 21373 / 4096,
                  (974455051 - 909621504 * _K1 + 299761632 * _K2) / 24772608),
        "beta": (0.0, -9 / 512, 53 / 1024, -7385 / 131072),
        "sigma": (0.0, 0.0, 49 / 32, -20825 / 2048),
        "tau": (0.0, -5 / 32, 1123 / 4096,
                (3876274583 - 1819243008 * _K1 + 599523264 * _K2) / 173408256),
        "delta": (0.0, 7 / 16, -2485 / 1536,
                  (-951281609 + 454810752 * _K1 - 149880816 * _K2) / 10838016),
        "omega_z": (1.0, 7 / 16, 161 / 1536,
                    (-1024017503 + 454810752 * _K1 - 149880816 * _K2) / 10838016),
    },
}
