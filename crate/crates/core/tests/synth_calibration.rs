use cirf_core::cirf::{BioImage, ShiftWindow};
use cirf_core::identify::eer;
use cirf_core::synth::{generate_corpus, zero_pad, CorpusSpec};

const H: usize = 32;
const SUBJECTS: usize = 200;

fn rows(x: &BioImage) -> [u64; H] {
    let mut out = [0u64; H];
    for (i, r) in out.iter_mut().enumerate() {
        for j in 0..64 {
            *r |= (x.get(i, j) as u64) << j;
        }
    }
    out
}

/// Fewest mismatches between the enrolled interior and the shifted probe.
fn distance(x: &[u64; H], y: &[u64; H]) -> u64 {
    let ShiftWindow { di_max, dj_max } = ShiftWindow::EXACT;
    let mask = (!0u64 << dj_max) & (!0u64 >> dj_max);
    let mut best = u64::MAX;
    for di in -(di_max as isize)..=di_max as isize {
        for dj in -(dj_max as isize)..=dj_max as isize {
            let r = dj.rem_euclid(64) as u32;
            let d = (di_max..H - di_max)
                .map(|i| {
                    let yi = (i as isize + di).rem_euclid(H as isize) as usize;
                    ((x[i] ^ y[yi].rotate_right(r)) & mask).count_ones() as u64
                })
                .sum();
            best = best.min(d);
        }
    }
    best
}

#[test]
fn default_corpus_separates_genuine_from_impostor() {
    let corpus = generate_corpus(&CorpusSpec { subjects: SUBJECTS, seed: 2024, ..CorpusSpec::default() }).unwrap();
    let enrolled: Vec<[[u64; H]; 2]> =
        (0..SUBJECTS).map(|s| [0, 1].map(|f| rows(&zero_pad(corpus.get(s, f, 0), ShiftWindow::EXACT)))).collect();
    let probes: Vec<[[u64; H]; 2]> = (0..SUBJECTS).map(|s| [0, 1].map(|f| rows(corpus.get(s, f, 1)))).collect();
    let (mut genuine, mut impostor) = (Vec::new(), Vec::new());
    for (q, p) in probes.iter().enumerate() {
        let fused: Vec<u64> = enrolled.iter().map(|e| distance(&e[0], &p[0]) + distance(&e[1], &p[1])).collect();
        genuine.push(fused[q]);
        impostor.push((0..SUBJECTS).filter(|&n| n != q).map(|n| fused[n]).min().unwrap());
    }
    let rate = eer(&genuine, &impostor).unwrap();
    assert!(rate < 0.05, "eer {rate}");
}
