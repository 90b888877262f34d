//! High-precision reference values of the radial profiles Φ_m(r) for
//! non-closed-form s, computed independently with 40-digit arithmetic.
//! Entries are (s, m, r, Φ_m(r)).

#![allow(clippy::excessive_precision)]

pub const PROFILES: &[(f64, usize, f64, f64)] = &[
    (0.6, 1, 0.0, 0.29942005917982891),
    (0.6, 1, 0.01, 0.29940242907606838),
    (0.6, 1, 0.3, 0.284193511141325559),
    (0.6, 1, 1.0, 0.180965374408169127),
    (0.6, 1, 2.5, 0.0470641021851065491),
    (0.6, 1, 6.0, 0.0069638023403861884),
    (0.6, 1, 15.0, 0.000888686959813000989),
    (0.6, 1, 40.0, 0.000100662646577162794),
    (0.6, 2, 0.0, 0.119730313105068519),
    (0.6, 2, 0.01, 0.119721101984595857),
    (0.6, 2, 0.3, 0.111826960192276305),
    (0.6, 2, 1.0, 0.0614698975712023913),
    (0.6, 2, 2.5, 0.00959883477038910871),
    (0.6, 2, 6.0, 0.000624059566421698377),
    (0.6, 2, 15.0, 0.0000316468216311868565),
    (0.6, 2, 40.0, 1.33721684678341036e-6),
    (0.6, 3, 0.0, 0.0561209756641145505),
    (0.6, 3, 0.01, 0.0561157508704958528),
    (0.6, 3, 0.3, 0.0516653536635336093),
    (0.6, 3, 1.0, 0.02485323098741614),
    (0.6, 3, 2.5, 0.00239753924447918419),
    (0.6, 3, 6.0, 0.0000694216321317530393),
    (0.6, 3, 15.0, 1.4035339999258432e-6),
    (0.6, 3, 40.0, 2.21432997337943791e-8),
    (0.6, 4, 0.0, 0.0293214901649940232),
    (0.6, 4, 0.01, 0.0293183240918473285),
    (0.6, 4, 0.3, 0.0266370833420886822),
    (0.6, 4, 1.0, 0.0113209828118223351),
    (0.6, 4, 2.5, 0.000689089204494262608),
    (0.6, 4, 6.0, 8.97881090333700408e-6),
    (0.6, 4, 15.0, 7.25424754106779702e-8),
    (0.6, 4, 40.0, 4.27592736937547733e-10),
    (0.6, 5, 0.0, 0.0166320483683476301),
    (0.6, 5, 0.01, 0.0166300209235709885),
    (0.6, 5, 0.3, 0.0149224842709137063),
    (0.6, 5, 1.0, 0.00564400786603092541),
    (0.6, 5, 2.5, 0.000220431111002353186),
    (0.6, 5, 6.0, 1.3034882775602452e-6),
    (0.6, 5, 15.0, 4.21620021539790056e-9),
    (0.6, 5, 40.0, 9.28922961602625834e-12),
    (0.75, 1, 0.0, 0.287352751452164445),
    (0.75, 1, 0.01, 0.287342141368263791),
    (0.75, 1, 0.3, 0.277999305904779544),
    (0.75, 1, 1.0, 0.20203815960784013),
    (0.75, 1, 2.5, 0.0511488945306717663),
    (0.75, 1, 6.0, 0.00422346322254737898),
    (0.75, 1, 15.0, 0.000362882342819480982),
    (0.75, 1, 40.0, 0.0000299440098605222382),
    (0.75, 2, 0.0, 0.0947480688973549005),
    (0.75, 2, 0.01, 0.0947440779863880564),
    (0.75, 2, 0.3, 0.091235402649515241),
    (0.75, 2, 1.0, 0.063184557589447939),
    (0.75, 2, 2.5, 0.0120432143589311491),
    (0.75, 2, 6.0, 0.000429131066221060867),
    (0.75, 2, 15.0, 0.0000140775814016771488),
    (0.75, 2, 40.0, 4.29935306015576669e-7),
    (0.75, 3, 0.0, 0.0337737278807792571),
    (0.75, 3, 0.01, 0.0337721641093745685),
    (0.75, 3, 0.3, 0.032399256297427065),
    (0.75, 3, 1.0, 0.0215830660542000373),
    (0.75, 3, 2.5, 0.00325144807954393527),
    (0.75, 3, 6.0, 0.0000526583682783447032),
    (0.75, 3, 15.0, 6.63134867706252837e-7),
    (0.75, 3, 40.0, 7.50302610716337495e-9),
    (0.75, 4, 0.0, 0.0127037807790746603),
    (0.75, 4, 0.01, 0.0127031475393237324),
    (0.75, 4, 0.3, 0.0121478872562729293),
    (0.75, 4, 1.0, 0.00783017123655861858),
    (0.75, 4, 2.5, 0.000963410729247177251),
    (0.75, 4, 6.0, 7.40116898344541436e-6),
    (0.75, 4, 15.0, 3.59366692681204674e-8),
    (0.75, 4, 40.0, 1.5074638683911258e-10),
    (0.75, 5, 0.0, 0.00497777077181780538),
    (0.75, 5, 0.01, 0.00497750718762012048),
    (0.75, 5, 0.3, 0.00474664266048076938),
    (0.75, 5, 1.0, 0.00297255132471004576),
    (0.75, 5, 2.5, 0.000305910278841648188),
    (0.75, 5, 6.0, 1.15623699548489748e-6),
    (0.75, 5, 15.0, 2.1728849857731635e-9),
    (0.75, 5, 40.0, 3.38116916434733044e-12),
    (0.9, 1, 0.0, 0.283068758591619007),
    (0.9, 1, 0.01, 0.283060776691999572),
    (0.9, 1, 0.3, 0.275982227634380802),
    (0.9, 1, 1.0, 0.214188712105068599),
    (0.9, 1, 2.5, 0.0557682732065961375),
    (0.9, 1, 6.0, 0.00159573718236015436),
    (0.9, 1, 15.0, 0.0000891809535729057314),
    (0.9, 1, 40.0, 5.44252068192032428e-6),
    (0.9, 2, 0.0, 0.0837301201103362375),
    (0.9, 2, 0.01, 0.083727654645696415),
    (0.9, 2, 0.3, 0.0815419574743332243),
    (0.9, 2, 1.0, 0.0625319984157387306),
    (0.9, 2, 2.5, 0.014843519625336764),
    (0.9, 2, 6.0, 0.000186166373412258299),
    (0.9, 2, 15.0, 3.70878955696445648e-6),
    (0.9, 2, 40.0, 8.34826304770421546e-8),
    (0.9, 3, 0.0, 0.0254075615581493206),
    (0.9, 3, 0.01, 0.0254067896337948285),
    (0.9, 3, 0.3, 0.0247226529761117362),
    (0.9, 3, 1.0, 0.0187907964997814121),
    (0.9, 3, 2.5, 0.00417230372900151411),
    (0.9, 3, 6.0, 0.0000259260041879400472),
    (0.9, 3, 15.0, 1.83706244922412759e-7),
    (0.9, 3, 40.0, 1.52564023254768055e-9),
    (0.9, 4, 0.0, 0.00784793986048046817),
    (0.9, 4, 0.01, 0.0078476955186766965),
    (0.9, 4, 0.3, 0.00763119465022427894),
    (0.9, 4, 1.0, 0.00575899949640995687),
    (0.9, 4, 2.5, 0.0012140157370810262),
    (0.9, 4, 6.0, 4.11831918009803567e-6),
    (0.9, 4, 15.0, 1.03616774422109035e-8),
    (0.9, 4, 40.0, 3.17549846141842459e-11),
    (0.9, 5, 0.0, 0.00245715056148181335),
    (0.9, 5, 0.01, 0.00245707250736232327),
    (0.9, 5, 0.3, 0.0023879269851661532),
    (0.9, 5, 1.0, 0.00179138784529332677),
    (0.9, 5, 2.5, 0.000361965218290891444),
    (0.9, 5, 6.0, 7.25823077680426809e-7),
    (0.9, 5, 15.0, 6.48003506836883118e-10),
    (0.9, 5, 40.0, 7.32954387636249037e-13),
];
