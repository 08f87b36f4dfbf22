/// Coefficients `a_0 … a_75` of the degree-75 reference interpolant of
/// `1/(1+x)` on nodes `0.3 j`, `j = 0 … 18`, with `k = 3`, to twelve printed digits.
pub const REFERENCE: [f64; 76] = [
    1.0, -1.000000000000, 1.000000000000, -1.000000000000,
    0.769230765432, -0.591715921811, 0.455165657066, -0.350124490177,
    0.218822618520, -0.136753442090, 0.085452696109, -0.053404312398,
    0.028144617397, -0.014953338935, 0.008262188243, -0.005370784216,
    0.003734873988, -0.003633027430, 0.004645502211, -0.006813570816,
    0.007086610952, -0.007144432312, 0.006238342564, -0.002646146059,
    -0.002374282360, 0.008387675067, -0.015766978592, 0.024857498610,
    -0.025373687351, 0.025025735340, -0.023974098174, 0.022321168853,
    -0.015945627926, 0.011155207224, -0.007619506803, 0.005069120726,
    -0.002759684498, 0.001479716734, -0.000790172686, 0.000430223475,
    -0.000208511304, 0.000106279314, -0.000056281013, 0.000028862889,
    -0.000011153733, 0.000002201139, 0.000002233629, -0.000004202246,
    0.000003699371, -0.000002870941, 0.000002068390, -0.000001402599,
    0.000000753699, -0.000000375935, 0.000000159621, -0.000000037499,
    -0.000000015690, 0.000000032004, -0.000000031616, 0.000000023406,
    -0.000000010968, 0.000000001564, 0.000000005590, -0.000000011521,
    0.000000012190, -0.000000012095, 0.000000011769, -0.000000011467,
    0.000000008698, -0.000000006652, 0.000000005132, -0.000000003988,
    0.000000002523, -0.000000001600, 0.000000001015, -0.000000000643,
];
