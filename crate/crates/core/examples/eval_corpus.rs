//! Writes the 73-case evaluation corpus with pinned mock model responses.
//!
//! From crates/core: cargo run -p dermacen-core --example eval_corpus -- fixtures/eval-corpus

use std::path::PathBuf;

use dermacen_core::evaluation::EvalCase;
use dermacen_core::orchestrator::{
    EmbeddingRequest, EmbeddingResponse, Granularity, MockProvider, NliRequest, NliResponse, TokenVector,
};
use dermacen_core::rules::extract_entities;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CONDITIONS: &[(&str, &str)] = &[
    ("Impetigo", "honey-coloured crusts over eroded skin, often around the nose and mouth"),
    ("Scabies", "intensely itchy papules and burrows in the finger webs and wrists, worse at night"),
    ("Psoriasis", "well-demarcated erythematous plaques with silvery scale on extensor surfaces"),
    ("Atopic Dermatitis", "chronic itchy eczematous patches in the flexures with lichenification"),
    ("Contact Dermatitis", "a sharply bordered itchy eruption matching the site of an external exposure"),
    ("Urticaria", "transient itchy wheals that resolve within a day without marks"),
    ("Vitiligo", "symmetric depigmented macules with sharp borders"),
    ("Rosacea", "central facial erythema with telangiectasia and papulopustules"),
    ("Herpes Zoster", "grouped vesicles on a red base in a single dermatome with preceding pain"),
    ("Pityriasis Rosea", "a herald patch followed by oval scaly patches along skin cleavage lines"),
    ("Tinea Corporis", "an annular scaly plaque with an active edge and central clearing"),
    ("Lichen Planus", "purple polygonal flat-topped papules with fine white streaks"),
    ("Bullous Pemphigoid", "tense blisters on an urticarial base in an older adult"),
    ("Pemphigus Vulgaris", "flaccid blisters and painful oral erosions"),
    ("Granuloma Annulare", "a ring of skin-coloured papules on the dorsum of the hand"),
    ("Erythema Nodosum", "tender red nodules on the shins"),
    ("Keloid", "a firm shiny scar extending beyond the original wound"),
    ("Melasma", "symmetric brown patches on the cheeks and forehead"),
    ("Folliculitis", "small pustules centred on hair follicles"),
    ("Hidradenitis Suppurativa", "recurrent painful nodules and sinus tracts in the axillae and groin"),
    ("Seborrhoeic Dermatitis", "greasy yellow scale on the scalp, eyebrows and nasolabial folds"),
    ("Molluscum Contagiosum", "pearly umbilicated papules in clusters"),
    ("Basal Cell Carcinoma", "a pearly nodule with rolled edges and arborizing vessels"),
    ("Squamous Cell Carcinoma", "a keratotic, tender nodule on sun-damaged skin"),
    ("Melanoma", "an asymmetric pigmented lesion with irregular border and colour variation"),
    ("Actinic Keratosis", "rough scaly macules on chronically sun-exposed skin"),
    ("Dermatofibroma", "a firm brown papule that dimples when pinched"),
    ("Keratoacanthoma", "a rapidly growing crateriform nodule with a keratin plug"),
    ("Solar Lentigo", "a uniformly tan macule on sun-exposed skin"),
    ("Cellulitis", "a spreading, warm, tender erythema with fever"),
    ("Discoid Lupus Erythematosus", "scarring scaly plaques with follicular plugging on the face"),
    ("Alopecia Areata", "smooth round patches of hair loss with exclamation-mark hairs"),
    ("Erythema Multiforme", "target lesions on the palms following a viral infection"),
    ("Necrobiosis Lipoidica", "yellow-brown atrophic plaques on the shins"),
    ("Pyogenic Granuloma", "a friable bleeding red papule that grew over weeks"),
    ("Morphea", "an indurated ivory plaque with a violaceous rim"),
];

const MATCHED: usize = 28;
const MISMATCHED_N: usize = 22;
const MISMATCHED_C: usize = 21;
const CONTEXT_N: usize = 7;
const CONTEXT_C: usize = 3;

#[derive(Clone, Copy, PartialEq)]
enum Label {
    C,
    N,
    E,
}

struct Target {
    case: EvalCase,
    ts_context: f64,
    ts_entity: f64,
    nli_context: (Label, f64),
    nli_entity: (Label, f64),
}

/// `n` offsets spread linearly over `[-k, k]`, summing to zero.
fn spread(n: usize, k: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| k * (2.0 * i as f64 / (n - 1) as f64 - 1.0)).collect()
}

fn unit(cos: f64) -> Vec<f64> {
    vec![cos, (1.0 - cos * cos).max(0.0).sqrt()]
}

fn nli(label: Label, p: f64) -> NliResponse {
    let rest = 1.0 - p;
    let (a, b) = (rest * 0.6, rest - rest * 0.6);
    match label {
        Label::E => NliResponse { contradiction: b, neutral: a, entailment: p },
        Label::N => NliResponse { contradiction: b, neutral: p, entailment: a },
        Label::C => NliResponse { contradiction: p, neutral: a, entailment: b },
    }
}

fn first_words(text: &str, n: usize) -> Vec<String> {
    text.split_whitespace().take(n).map(str::to_string).collect()
}

fn worked_examples() -> Vec<Target> {
    let one = EvalCase {
        id: String::new(),
        question: "This 40-year-old woman has a longstanding history of crusted skin lesions since she was 12 years old. Lesions started on her neck, axillae, and upper back. They flare up intermittently with increasing pain and malodorous discharge. Many family members (including her grandfather, father, uncles, and twin sister) have similar lesions.\nOn examination, she had confluent, crusted, greasy papules across the upper back, lateral neck, and axillae. She also had nail changes.".into(),
        premise: "The diagnosis is Darier disease, an autosomal dominant genodermatosis. It typically presents with scaly, crusted papules in a seborrhoeic distribution and in skin folds.\n\nIt is caused by a mutation in the ATP2A2 gene, which leads to SERCA2 protein dysfunction, interfering with cellular calcium signaling. This results in impaired cellular adhesion and epidermal blistering.".into(),
        premise_entity: String::new(),
        image: None,
        hypothesis: "Diagnosis - Darier Disease (Keratosis Follicularis)\n\nClinical Features Supporting Diagnosis:\nThe patient presents with several key features that indicate Darier Disease:\n\n1. Longstanding History: The patient has experienced these skin lesions since a young age, which is common for genetic disorders like Darier Disease.\n\n2. Family History: There is a strong familial pattern, with multiple generations affected, which supports a genetic etiology like that of Darier Disease, an autosomal dominant condition.\n\n3. Morphology and Distribution of Lesions: The greasy papules and crusted lesions are typically seen in Darier Disease, and the distribution on the upper back, lateral neck, and axillae fits the pattern of seborrheic areas commonly involved in this condition.\n\n4. Nail Changes: Nail abnormalities such as red and white streaks or a V-shaped nick at the tip of the nails, are characteristic findings in Darier Disease.\n\n5. Malodorous Discharge and Pain: Secondary infection can be common in these lesions, leading to a malodorous discharge and pain, especially during flares.\n\nThe presented photograph shows confluent, crusted, greasy papules that are consistent with the features of Darier Disease lesions.".into(),
        hypothesis_entity: String::new(),
        entity_extraction_failed: false,
    };
    let two = EvalCase {
        id: String::new(),
        question: "This 78-year-old lady presented with a new reddish-orange spreading rash on the right side of her face overnight. The affected skin was raised with a demarcated border and areas of blistering. Her white cell count and C-reactive protein were very raised and she described an episode of fever and rigors.".into(),
        premise: "This rash and history is classical for erysipelas.\nErysipelas is a superficial form of cellulitis, a potentially serious bacterial infection affecting the skin. Erysipelas affects the upper dermis and extends into the superficial cutaneous lymphatics.".into(),
        premise_entity: String::new(),
        image: None,
        hypothesis: "Diagnosis - Cellulitis\nClinical Features Supporting the Diagnosis:\nThe patient's presentation of a reddish-orange spreading rash with raised, demarcated borders and areas of blistering on the right side of her face is indicative of cellulitis. Cellulitis is a common bacterial skin infection that affects the deeper layers of skin and the underlying tissue.\n\nThe acute nature of the rash (appearing overnight), alongside systemic symptoms such as fever and rigors (shaking chills), supports an infectious etiology. The raised white cell count and elevated C-reactive protein are indicative of an acute inflammatory response to an infection.\n\nThe characteristics of the rash, such as its rapid spread, the clearly defined border, swelling, and area of blistering, further suggest cellulitis, particularly given the absence of a central lesion that would suggest a bite or sting, and the lack of other distinguishing marks suggesting an alternative diagnosis such as shingles or contact dermatitis.\n\nThe patient's age (78 years old) is also a relevant factor, as older individuals have a higher risk of developing cellulitis, possibly due to a weakened immune system and other comorbidities that may compromise skin integrity and the body's natural defenses against infection.\n\nGiven these clinical features and the patient's rapid onset of symptoms, cellulitis seems to be the most probable diagnosis for this case.".into(),
        hypothesis_entity: String::new(),
        entity_extraction_failed: false,
    };
    vec![
        Target { case: one, ts_context: 1.0, ts_entity: 1.0, nli_context: (Label::E, 0.675), nli_entity: (Label::E, 0.49) },
        Target { case: two, ts_context: 0.89, ts_entity: 1.0, nli_context: (Label::E, 0.55), nli_entity: (Label::E, 0.83) },
    ]
}

fn synthetic(index: usize, premise: usize, hypothesis: usize, rng: &mut ChaCha8Rng) -> EvalCase {
    use rand::Rng;
    let (p, p_desc) = CONDITIONS[premise];
    let (h, h_desc) = CONDITIONS[hypothesis];
    let age = rng.random_range(18..85);
    let who = if index % 2 == 0 { "woman" } else { "man" };
    EvalCase {
        id: String::new(),
        question: format!("This {age}-year-old {who} presents with {p_desc}. What is the diagnosis?"),
        premise: format!("The diagnosis is {p}. It is characterised by {p_desc}."),
        premise_entity: String::new(),
        image: None,
        hypothesis: format!(
            "Diagnosis - {h}\n\nClinical Features Supporting Diagnosis:\nThe image and history show {h_desc}, which is typical of {h}. The age of {age} years fits the usual presentation."
        ),
        hypothesis_entity: String::new(),
        entity_extraction_failed: false,
    }
}

fn main() {
    let out: PathBuf = std::env::args().nth(1).expect("output directory").into();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0073);
    let k = CONDITIONS.len();

    // Entity pairs are distinct, so every mock request is distinct.
    let mut matched: Vec<usize> = (0..k).collect();
    matched.shuffle(&mut rng);
    matched.truncate(MATCHED);
    let mut pairs: Vec<(usize, usize)> =
        (0..k).flat_map(|a| (0..k).filter(move |&b| b != a).map(move |b| (a, b))).collect();
    pairs.shuffle(&mut rng);
    pairs.truncate(MISMATCHED_N + MISMATCHED_C);

    let ts_entity_total = 0.69 * 73.0 - 30.0;
    let n_mean = 0.55;
    let c_mean = (ts_entity_total - n_mean * MISMATCHED_N as f64) / MISMATCHED_C as f64;
    let n_ts = spread(MISMATCHED_N, 0.1);
    let c_ts = spread(MISMATCHED_C, 0.1);
    let p_spread = spread(73, 0.15);

    let mut targets = Vec::new();
    for (i, &c) in matched.iter().enumerate() {
        let case = synthetic(i, c, c, &mut rng);
        targets.push(Target { case, ts_context: 0.0, ts_entity: 1.0, nli_context: (Label::E, 0.0), nli_entity: (Label::E, 0.0) });
    }
    for (j, &(a, b)) in pairs.iter().enumerate() {
        let case = synthetic(MATCHED + j, a, b, &mut rng);
        let (label, ts) = if j < MISMATCHED_N { (Label::N, n_mean + n_ts[j]) } else { (Label::C, c_mean + c_ts[j - MISMATCHED_N]) };
        // The last CONTEXT_C contradict in context too; the CONTEXT_N before them are neutral.
        let ctx = if j >= pairs.len() - CONTEXT_C {
            Label::C
        } else if j >= pairs.len() - CONTEXT_C - CONTEXT_N {
            Label::N
        } else {
            Label::E
        };
        targets.push(Target { case, ts_context: 0.0, ts_entity: ts, nli_context: (ctx, 0.0), nli_entity: (label, 0.0) });
    }

    // Context similarity by context label, totalling 0.70 over all 73 cases.
    let examples = worked_examples();
    let rest_total = 0.70 * 73.0 - examples.iter().map(|s| s.ts_context).sum::<f64>();
    let (n_ctx, c_ctx) = (spread(CONTEXT_N, 0.04), spread(CONTEXT_C, 0.03));
    let e_count = targets.iter().filter(|s| s.nli_context.0 == Label::E).count();
    let e_mean = (rest_total - 0.60 * CONTEXT_N as f64 - 0.50 * CONTEXT_C as f64) / e_count as f64;
    let e_ctx = spread(e_count, 0.12);
    let mut offsets = [e_ctx.into_iter(), n_ctx.into_iter(), c_ctx.into_iter()];
    for s in &mut targets {
        use rand::Rng;
        s.ts_context = match s.nli_context.0 {
            Label::E => e_mean + offsets[0].next().unwrap(),
            Label::N => 0.60 + offsets[1].next().unwrap(),
            Label::C => 0.50 + offsets[2].next().unwrap(),
        };
        s.nli_context.1 = rng.random_range(0.45..0.95);
        s.nli_entity.1 = rng.random_range(0.45..0.95);
    }
    targets.shuffle(&mut rng);
    let mut all = examples;
    all.extend(targets);

    let cases_dir = out.join("cases");
    let mock_dir = out.join("mock");
    for d in [&cases_dir, &mock_dir] {
        if d.exists() {
            std::fs::remove_dir_all(d).unwrap();
        }
        std::fs::create_dir_all(d).unwrap();
    }
    let mock = MockProvider::new();
    let mut d_order: Vec<usize> = (0..all.len()).collect();
    d_order.shuffle(&mut rng);
    for (i, s) in all.iter_mut().enumerate() {
        let case = &mut s.case;
        case.id = format!("case-{:03}", i + 1);
        case.premise_entity = extract_entities(&case.premise, true).joined();
        case.hypothesis_entity = extract_entities(&case.hypothesis, false).joined();
        assert!(!case.premise_entity.is_empty() && !case.hypothesis_entity.is_empty(), "{}", case.id);

        let sentence = |a: &str, b: &str, cos: f64| {
            mock.insert_embedding(
                &EmbeddingRequest { texts: vec![a.into(), b.into()], granularity: Granularity::Sentence },
                &EmbeddingResponse { vectors: Some(vec![unit(1.0), unit(cos)]), token_vectors: None },
            );
        };
        sentence(&case.premise, &case.hypothesis, s.ts_context);
        sentence(&case.premise_entity, &case.hypothesis_entity, s.ts_entity);

        let d = p_spread[d_order[i]];
        let (precision, recall) = (0.63 + d, 0.67 + d);
        let ptoks = first_words(&case.premise, 1);
        let htoks = first_words(&case.hypothesis, 2);
        let tv = |t: &String, cos: f64| TokenVector { token: t.clone(), vector: unit(cos) };
        mock.insert_embedding(
            &EmbeddingRequest { texts: vec![case.premise.clone(), case.hypothesis.clone()], granularity: Granularity::Token },
            &EmbeddingResponse {
                vectors: None,
                token_vectors: Some(vec![
                    vec![tv(&ptoks[0], 1.0)],
                    vec![tv(&htoks[0], recall), tv(&htoks[1], 2.0 * precision - recall)],
                ]),
            },
        );

        let ctx = NliRequest { premise: case.premise.clone(), hypothesis: case.hypothesis.clone() };
        mock.insert_nli(&ctx, &nli(s.nli_context.0, s.nli_context.1));
        let ent = NliRequest { premise: case.premise_entity.clone(), hypothesis: case.hypothesis_entity.clone() };
        mock.insert_nli(&ent, &nli(s.nli_entity.0, s.nli_entity.1));

        let text = serde_json::to_string_pretty(case).unwrap();
        std::fs::write(cases_dir.join(format!("{}.json", case.id)), text + "\n").unwrap();
    }
    assert_eq!(mock.len(), all.len() * 5, "mock requests collided");
    mock.write_dir(&mock_dir).unwrap();

    // 72 reviews: symptom/image scores sum to 315, reasoning scores to 310.
    let mut a: Vec<u8> = [vec![5; 30], vec![4; 39], vec![3; 3]].concat();
    let mut b: Vec<u8> = [vec![5; 26], vec![4; 42], vec![3; 4]].concat();
    a.shuffle(&mut rng);
    b.shuffle(&mut rng);
    let mut csv = String::from("case_id,symptom_image_score,diagnostic_reasoning_score,reviewer\n");
    for i in 0..72 {
        let reviewer = if i % 2 == 0 { "dr-a" } else { "dr-b" };
        csv.push_str(&format!("case-{:03},{},{},{reviewer}\n", i + 1, a[i], b[i]));
    }
    std::fs::write(out.join("reviews.csv"), csv).unwrap();
    println!("wrote {} cases, {} mock fixtures", all.len(), mock.len());
}
