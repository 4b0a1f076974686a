#![allow(clippy::excessive_precision)]

// Reference values evaluated in 50-digit arithmetic, independent of the
// crate. Columns: epsilon, delta, main factor, draft factor, advantage
// bound (sup term 0.7), universal bound (B = 2.5), weak-threat bound (sup
// term 0.4), reconstruction bound (|Z| = 10), Hoeffding at n = 100 and
// n = 1000.
pub const BOUNDS: [[f64; 10]; 50] = [
    [
        0.001,
        0.0,
        0.0004999999583333375,
        0.00099950016662500833194,
        0.00034999997083333625,
        0.00124999989583334375,
        0.000199999983333335,
        0.00099950016662500833194,
        0.0,
        0.0,
    ],
    [
        0.001,
        1.0e-6,
        0.00050099945833337916666,
        0.0010004991671248417069,
        0.00035069962083336541666,
        0.0012524986458334479167,
        0.00020039978333335166666,
        0.0010095001666250083319,
        0.0,
        0.0,
    ],
    [
        0.001,
        0.001,
        0.0014994999583750041625,
        0.0019985006664583833236,
        0.0010496499708625029137,
        0.0037487498959375104062,
        0.000599799983350001665,
        0.010999500166625008332,
        0.0,
        0.0,
    ],
    [
        0.001,
        0.05,
        0.050474999960416670625,
        0.050949525158293757915,
        0.035332499972291669437,
        0.12618749990104167656,
        0.02018999998416666825,
        0.50099950016662500833,
        0.0,
        0.0,
    ],
    [
        0.001,
        0.3,
        0.30034999997083333625,
        0.30069965011663750583,
        0.21024499997958333537,
        0.75087499992708334062,
        0.1201399999883333345,
        3.0009995001666250083,
        0.0,
        0.0,
    ],
    [
        0.01,
        0.0,
        0.0049999583337499957838,
        0.0099501662508319464261,
        0.0034999708336249970486,
        0.012499895834374989459,
        0.0019999833334999983135,
        0.0099501662508319464261,
        0.0,
        0.0,
    ],
    [
        0.01,
        1.0e-6,
        0.0050009533337916620338,
        0.0099511563006656955941,
        0.0035006673336541634236,
        0.012502383334479155084,
        0.0020003813335166648135,
        0.0099601662508319464261,
        0.0,
        0.0,
    ],
    [
        0.01,
        0.001,
        0.005994958375416245788,
        0.01094021608458111448,
        0.0041964708627913720516,
        0.01498739593854061447,
        0.0023979833501664983152,
        0.019950166250831946426,
        0.0,
        0.0,
    ],
    [
        0.01,
        0.05,
        0.054749960417062495995,
        0.059452657938290349105,
        0.038324972291943747196,
        0.13687490104265623999,
        0.021899984166824998398,
        0.50995016625083194643,
        0.0,
        0.0,
    ],
    [
        0.01,
        0.3,
        0.30349997083362499705,
        0.3069651163755823625,
        0.21244997958353749793,
        0.75874992708406249262,
        0.12139998833344999882,
        3.0099501662508319464,
        0.0,
        0.0,
    ],
    [
        0.1,
        0.0,
        0.049958374957879972198,
        0.095162581964040426836,
        0.034970862470515980539,
        0.1248959373946999305,
        0.019983349983151988879,
        0.095162581964040426836,
        0.0,
        0.0,
    ],
    [
        0.1,
        1.0e-6,
        0.049959324999505014318,
        0.095163486801458462795,
        0.034971527499653510023,
        0.1248983124987625358,
        0.019983729999802005727,
        0.095172581964040426836,
        0.0,
        0.0,
    ],
    [
        0.1,
        0.001,
        0.050908416582922092226,
        0.096067419382076386409,
        0.035635891608045464558,
        0.12727104145730523057,
        0.02036336663316883689,
        0.10516258196404042684,
        0.0,
        0.0,
    ],
    [
        0.1,
        0.05,
        0.097460456209985973588,
        0.14040445286583840549,
        0.068222319346990181512,
        0.24365114052496493397,
        0.038984182483994389435,
        0.59516258196404042684,
        0.0,
        0.0,
    ],
    [
        0.1,
        0.3,
        0.33497086247051598054,
        0.36661380737482829879,
        0.23447960372936118638,
        0.83742715617628995135,
        0.13398834498820639222,
        3.0951625819640404268,
        0.0,
        0.0,
    ],
    [
        0.5,
        0.0,
        0.24491866240370912928,
        0.3934693402873665764,
        0.17144306368259639049,
        0.61229665600927282319,
        0.097967464961483651711,
        0.3934693402873665764,
        0.55357398812375951555,
        0.99999938591999614265,
    ],
    [
        0.5,
        1.0e-6,
        0.24491941748504672557,
        0.39346994681802628903,
        0.1714435922395327079,
        0.61229854371261681392,
        0.097967766994018690227,
        0.3934793402873665764,
        0.55357398812375951555,
        0.99999938591999614265,
    ],
    [
        0.5,
        0.001,
        0.24567374374130542015,
        0.39407587094707920982,
        0.1719716206189137941,
        0.61418435935326355037,
        0.098269497496522168059,
        0.4034693402873665764,
        0.55357398812375951555,
        0.99999938591999614265,
    ],
    [
        0.5,
        0.05,
        0.28267272928352367281,
        0.42379587327299824758,
        0.19787091049846657097,
        0.70668182320880918203,
        0.11306909171340946913,
        0.8934693402873665764,
        0.55357398812375951555,
        0.99999938591999614265,
    ],
    [
        0.5,
        0.3,
        0.47144306368259639049,
        0.57542853820115660348,
        0.33001014457781747335,
        1.1786076592064909762,
        0.1885772254730385562,
        3.3934693402873665764,
        0.55357398812375951555,
        0.99999938591999614265,
    ],
    [
        1.0,
        0.0,
        0.4621171572600097585,
        0.6321205588285576784,
        0.32348201008200683095,
        1.1552928931500243963,
        0.1848468629040039034,
        0.6321205588285576784,
        0.99039680569060152539,
        1.0,
    ],
    [
        1.0,
        1.0e-6,
        0.46211769514285249849,
        0.63212092670799884985,
        0.32348238659999674894,
        1.1552942378571312462,
        0.1848470780571409994,
        0.6321305588285576784,
        0.99039680569060152539,
        1.0,
    ],
    [
        1.0,
        0.001,
        0.46265504010274974874,
        0.63248843826972912073,
        0.32385852807192482412,
        1.1566376002568743719,
        0.1850620160410998995,
        0.6421205588285576784,
        0.99039680569060152539,
        1.0,
    ],
    [
        1.0,
        0.05,
        0.48901129939700927058,
        0.65051453088712979448,
        0.3423079095779064894,
        1.2225282484925231764,
        0.19560451975880370823,
        1.1321205588285576784,
        0.99039680569060152539,
        1.0,
    ],
    [
        1.0,
        0.3,
        0.62348201008200683095,
        0.74248439117999037488,
        0.43643740705740478167,
        1.5587050252050170774,
        0.24939280403280273238,
        3.6321205588285576784,
        0.99039680569060152539,
        1.0,
    ],
    [
        1.0986122886681098,
        0.0,
        0.50000000000000004073,
        0.66666666666666670287,
        0.35000000000000002851,
        1.2500000000000001018,
        0.20000000000000001629,
        0.66666666666666670287,
        0.99613909172754458545,
        1.0,
    ],
    [
        1.0986122886681098,
        1.0e-6,
        0.50000050000000004073,
        0.6666670000000000362,
        0.35000035000000002851,
        1.2500012500000001018,
        0.20000020000000001629,
        0.66667666666666670287,
        0.99613909172754458545,
        1.0,
    ],
    [
        1.0986122886681098,
        0.001,
        0.50050000000000004069,
        0.66700000000000003617,
        0.35035000000000002848,
        1.2512500000000001017,
        0.20020000000000001627,
        0.67666666666666670287,
        0.99613909172754458545,
        1.0,
    ],
    [
        1.0986122886681098,
        0.05,
        0.52500000000000003869,
        0.68333333333333336772,
        0.36750000000000002708,
        1.3125000000000000967,
        0.21000000000000001548,
        1.1666666666666667029,
        0.99613909172754458545,
        1.0,
    ],
    [
        1.0986122886681098,
        0.3,
        0.65000000000000002851,
        0.76666666666666669201,
        0.45500000000000001996,
        1.6250000000000000713,
        0.2600000000000000114,
        3.6666666666666667029,
        0.99613909172754458545,
        1.0,
    ],
    [
        2.0,
        0.0,
        0.76159415595576488812,
        0.86466471676338730811,
        0.53311590916903542168,
        1.9039853898894122203,
        0.30463766238230595525,
        0.86466471676338730811,
        0.99999899195150473397,
        1.0,
    ],
    [
        2.0,
        1.0e-6,
        0.76159439436160893235,
        0.86466485209867054472,
        0.53311607605312625265,
        1.9039859859040223309,
        0.30463775774464357294,
        0.86467471676338730811,
        0.99999899195150473397,
        1.0,
    ],
    [
        2.0,
        0.001,
        0.76183256179980912323,
        0.8648000520466239208,
        0.53328279325986638626,
        1.9045814044995228081,
        0.30473302471992364929,
        0.87466471676338730811,
        0.99999899195150473397,
        1.0,
    ],
    [
        2.0,
        0.05,
        0.77351444815797664371,
        0.8714314809252179427,
        0.5414601137105836506,
        1.9337861203949416093,
        0.30940577926319065749,
        1.3646647167633873081,
        0.99999899195150473397,
        1.0,
    ],
    [
        2.0,
        0.3,
        0.83311590916903542168,
        0.90526530173437111567,
        0.58318113641832479518,
        2.0827897729225885542,
        0.33324636366761416867,
        3.8646647167633873081,
        0.99999899195150473397,
        1.0,
    ],
    [
        5.0,
        0.0,
        0.98661429815143028888,
        0.9932620530009145329,
        0.69063000870600120222,
        2.4665357453785757222,
        0.39464571926057211555,
        0.9932620530009145329,
        0.99999999994600054448,
        1.0,
    ],
    [
        5.0,
        1.0e-6,
        0.98661431153713213745,
        0.99326205973886153199,
        0.69063001807599249622,
        2.4665357788428303436,
        0.39464572461485285498,
        0.9932720530009145329,
        0.99999999994600054448,
        1.0,
    ],
    [
        5.0,
        0.001,
        0.98662768385327885859,
        0.99326879094791361837,
        0.69063937869729520101,
        2.4665692096331971465,
        0.39465107354131154344,
        1.0032620530009145329,
        0.99999999994600054448,
        1.0,
    ],
    [
        5.0,
        0.05,
        0.98728358324385877444,
        0.99359895035086880626,
        0.69109850827070114211,
        2.4682089581096469361,
        0.39491343329754350977,
        1.4932620530009145329,
        0.99999999994600054448,
        1.0,
    ],
    [
        5.0,
        0.3,
        0.99063000870600120222,
        0.99528343710064017303,
        0.69344100609420084155,
        2.4765750217650030055,
        0.39625200348240048089,
        3.9932620530009145329,
        0.99999999994600054448,
        1.0,
    ],
    [
        10.0,
        0.0,
        0.99990920426259513121,
        0.99995460007023751515,
        0.69993644298381659185,
        2.499773010656487828,
        0.39996368170503805248,
        0.99995460007023751515,
        0.99999999997209773475,
        1.0,
    ],
    [
        10.0,
        1.0e-6,
        0.99990920435339086862,
        0.99995460011563744491,
        0.69993644304737360803,
        2.4997730108834771715,
        0.39996368174135634745,
        0.99996460007023751515,
        0.99999999997209773475,
        1.0,
    ],
    [
        10.0,
        0.001,
        0.99990929505833253608,
        0.99995464547016727763,
        0.69993650654083277526,
        2.4997732376458313402,
        0.39996371802333301443,
        1.0099546000702375151,
        0.99999999997209773475,
        1.0,
    ],
    [
        10.0,
        0.05,
        0.99991374404946537465,
        0.99995687006672563939,
        0.69993962083462576226,
        2.4997843601236634366,
        0.39996549761978614986,
        1.4999546000702375151,
        0.99999999997209773475,
        1.0,
    ],
    [
        10.0,
        0.3,
        0.99993644298381659185,
        0.9999682200491662606,
        0.69995551008867161429,
        2.4998411074595414796,
        0.39997457719352663674,
        3.9999546000702375151,
        0.99999999997209773475,
        1.0,
    ],
    [
        30.0,
        0.0,
        0.99999999999981284754,
        0.99999999999990642377,
        0.69999999999986899328,
        2.4999999999995321189,
        0.39999999999992513902,
        0.99999999999990642377,
        0.99999999997222411227,
        1.0,
    ],
    [
        30.0,
        1.0e-6,
        0.99999999999981284773,
        0.99999999999990642386,
        0.69999999999986899341,
        2.4999999999995321193,
        0.39999999999992513909,
        1.0000099999999064238,
        0.99999999997222411227,
        1.0,
    ],
    [
        30.0,
        0.001,
        0.99999999999981303469,
        0.99999999999990651735,
        0.69999999999986912429,
        2.4999999999995325867,
        0.39999999999992521388,
        1.0099999999999064238,
        0.99999999997222411227,
        1.0,
    ],
    [
        30.0,
        0.05,
        0.99999999999982220516,
        0.99999999999991110258,
        0.69999999999987554361,
        2.4999999999995555129,
        0.39999999999992888207,
        1.4999999999999064238,
        0.99999999997222411227,
        1.0,
    ],
    [
        30.0,
        0.3,
        0.99999999999986899328,
        0.99999999999993449664,
        0.69999999999990829529,
        2.4999999999996724832,
        0.39999999999994759731,
        3.9999999999999064238,
        0.99999999997222411227,
        1.0,
    ],
];

// Calibration: advantage target A, delta, B, then the largest epsilon with
// universal bound <= A, or -1 when the target is infeasible at that delta.
pub const CALIBRATION: [[f64; 4]; 50] = [
    [0.001, 0.0, 2.5, 0.00080000004266667076267],
    [0.001, 1.0e-6, 2.5, 0.00079800084034839508853],
    [0.001, 0.001, 2.5, -1.0],
    [0.001, 0.05, 2.5, -1.0],
    [0.001, 0.3, 2.5, -1.0],
    [0.01, 0.0, 2.5, 0.0080000426670762713479],
    [0.01, 1.0e-6, 2.5, 0.0079980506332196632622],
    [0.01, 0.001, 2.5, 0.006006024060211874367],
    [0.01, 0.05, 2.5, -1.0],
    [0.01, 0.3, 2.5, -1.0],
    [0.05, 0.0, 2.5, 0.040005334613699161434],
    [0.05, 1.0e-6, 2.5, 0.040003373827463095869],
    [0.05, 0.001, 2.5, 0.038042625445850448606],
    [0.05, 0.05, 2.5, -1.0],
    [0.05, 0.3, 2.5, -1.0],
    [0.1, 0.0, 2.5, 0.080042707673536425824],
    [0.1, 1.0e-6, 2.5, 0.080040784594764234104],
    [0.1, 0.001, 2.5, 0.078117779263952025247],
    [0.1, 0.05, 2.5, -1.0],
    [0.1, 0.3, 2.5, -1.0],
    [0.25, 0.0, 2.5, 0.20067069546215116127],
    [0.25, 1.0e-6, 2.5, 0.20066887727868008489],
    [0.25, 0.001, 2.5, 0.19885085874516519013],
    [0.25, 0.05, 2.5, 0.10536051565782630123],
    [0.25, 0.3, 2.5, -1.0],
    [0.5, 0.0, 2.5, 0.40546510810816438198],
    [0.5, 1.0e-6, 2.5, 0.40546344144010882488],
    [0.5, 0.001, 2.5, 0.40379705100746736194],
    [0.5, 0.05, 2.5, 0.31845373111853461581],
    [0.5, 0.3, 2.5, -1.0],
    [0.75, 0.0, 2.5, 0.61903920840622343095],
    [0.75, 1.0e-6, 2.5, 0.61903766994350153624],
    [0.75, 0.001, 2.5, 0.61749956222063063095],
    [0.75, 0.05, 2.5, 0.53899650073268700512],
    [0.75, 0.3, 2.5, 0.0],
    [0.9, 0.0, 2.5, 0.753771802376380152],
    [0.9, 1.0e-6, 2.5, 0.75377033178706354194],
    [0.9, 0.001, 2.5, 0.75230013176492389612],
    [0.9, 0.05, 2.5, 0.67739882359180614081],
    [0.9, 0.3, 2.5, 0.17185025692665922234],
    [1.5, 0.0, 2.5, 1.3862943611198906188],
    [1.5, 1.0e-6, 2.5, 1.3862931111191093682],
    [1.5, 0.001, 2.5, 1.3850435792182379896],
    [1.5, 0.05, 2.5, 1.3217558399823194472],
    [1.5, 0.3, 2.5, 0.91629073187415506518],
    [2.4, 0.0, 2.5, 3.8918202981106266102],
    [2.4, 1.0e-6, 2.5, 3.8918192777019427281],
    [2.4, 0.001, 2.5, 3.8907993689765193889],
    [2.4, 0.05, 2.5, 3.8394523125933106279],
    [2.4, 0.3, 2.5, 3.5263605246161613897],
];
