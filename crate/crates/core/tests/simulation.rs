use pairsonic::crypto::ContactCard;
use pairsonic::protocol::Verdict;
use pairsonic::sim::{
    preset, run_campaign, run_session, run_session_with, AdversaryPolicy, CampaignSpec, NoiseModel,
    SimConfig, Transcript, UserScript,
};

fn verdicts(r: &pairsonic::sim::SessionReport) -> Vec<Verdict> {
    r.results.iter().map(|p| p.outcome.verdict).collect()
}

#[test]
fn honest_group_of_four_imports_everyone() {
    let r = run_session(4, &preset("none").unwrap(), UserScript::ConfirmAll, 0).unwrap();
    assert_eq!(verdicts(&r), vec![Verdict::ContactsImported; 4]);
    let names: Vec<Vec<String>> = r
        .results
        .iter()
        .map(|p| {
            p.outcome
                .contacts
                .iter()
                .map(|c: &ContactCard| c.name.clone())
                .collect()
        })
        .collect();
    for (i, got) in names.iter().enumerate() {
        let mut got = got.clone();
        got.sort();
        let want: Vec<String> = (0..4)
            .filter(|&j| j != i)
            .map(|j| format!("member-{j}"))
            .collect();
        assert_eq!(got, want);
    }
}

#[test]
fn key_substitution_is_caught() {
    for seed in 0..10 {
        let r = run_session(
            4,
            &preset("mitm_key_substitution").unwrap(),
            UserScript::ConfirmAll,
            seed,
        )
        .unwrap();
        assert_eq!(r.imported(), 0);
        assert!(r.interventions >= 1);
        assert!(verdicts(&r)
            .iter()
            .any(|v| matches!(v, Verdict::AbortedMismatch | Verdict::AbortedForeignOob)));
    }
}

#[test]
fn injected_verification_frame_aborts_everyone() {
    for seed in 0..100 {
        let r = run_session(
            4,
            &preset("oob_inject").unwrap(),
            UserScript::ConfirmAll,
            seed,
        )
        .unwrap();
        assert_eq!(
            verdicts(&r),
            vec![Verdict::AbortedForeignOob; 4],
            "seed {seed}"
        );
        assert_eq!(r.oob.frames_injected, 1);
    }
}

#[test]
fn device_out_of_earshot_never_joins() {
    let cfg = SimConfig {
        out_of_range: vec![2],
        ..Default::default()
    };
    let r = run_session_with(3, &preset("none").unwrap(), UserScript::ConfirmAll, 1, &cfg).unwrap();
    assert_eq!(r.imported(), 0);
    assert_eq!(r.results[2].outcome.verdict, Verdict::AbortedTimeout);
}

#[test]
fn impulsive_noise_never_false_accepts() {
    let spec = CampaignSpec {
        policies: vec![
            preset("none").unwrap(),
            preset("mitm_key_substitution").unwrap(),
        ],
        group_sizes: vec![3],
        seeds: 0..50,
        noises: vec![NoiseModel::Impulsive {
            rate: 20.0,
            amplitude: 1.5,
        }],
        users: UserScript::ConfirmAll,
        config: SimConfig::default(),
    };
    let rows = run_campaign(&spec).unwrap();
    assert_eq!(rows.iter().map(|r| r.false_accepts).sum::<usize>(), 0);
    // The bursts do disturb sessions; they must end in aborts, not silent success.
    assert!(rows.iter().any(|r| r.policy == "none" && r.imported < r.n));
}

#[test]
fn identical_inputs_give_identical_transcripts() {
    for (i, name) in [
        "none",
        "replay",
        "sybil_duplicate_id",
        "group_in_the_middle",
    ]
    .iter()
    .enumerate()
    {
        let p = preset(name).unwrap();
        let a = run_session(3 + i % 2, &p, UserScript::Rushing { p: 0.5 }, 42).unwrap();
        let b = run_session(3 + i % 2, &p, UserScript::Rushing { p: 0.5 }, 42).unwrap();
        assert_eq!(a.transcript.to_jsonl(), b.transcript.to_jsonl());
        let c = run_session(3 + i % 2, &p, UserScript::Rushing { p: 0.5 }, 43).unwrap();
        assert_ne!(a.transcript.digest(), c.transcript.digest());
    }
}

#[test]
fn transcript_round_trips_through_jsonl() {
    let r = run_session(3, &preset("replay").unwrap(), UserScript::ConfirmAll, 5).unwrap();
    let text = r.transcript.to_jsonl();
    assert_eq!(Transcript::from_jsonl(&text).unwrap(), r.transcript);
    assert!(r.transcript.records.iter().any(|t| t.kind == "Commit"));
}

#[test]
fn duplicate_identity_is_flagged_to_the_victim() {
    let r = run_session(
        4,
        &preset("sybil_duplicate_id").unwrap(),
        UserScript::ConfirmAll,
        3,
    )
    .unwrap();
    assert_eq!(r.imported(), 0);
    assert!(r.results[3].outcome.flags.duplicate_id);
}

#[test]
fn careless_users_are_the_residual_risk() {
    // With nobody looking at the other screens, a sybil that wins the race for
    // a member's identity goes unnoticed by everyone but the victim.
    let r = run_session(
        3,
        &preset("sybil_duplicate_id").unwrap(),
        UserScript::Rushing { p: 1.0 },
        0,
    )
    .unwrap();
    assert!(r.false_accepts() > 0);
    let careful = run_session(
        3,
        &preset("sybil_duplicate_id").unwrap(),
        UserScript::ConfirmAll,
        0,
    )
    .unwrap();
    assert_eq!(careful.false_accepts(), 0);
}

#[test]
fn one_rejection_aborts_the_whole_group() {
    for seed in 0..20 {
        let r = run_session(5, &preset("none").unwrap(), UserScript::RejectOne, seed).unwrap();
        assert_eq!(r.imported(), 0, "seed {seed}");
        assert!(r.results.iter().all(|p| p.outcome.contacts.is_empty()));
    }
}

#[test]
fn policy_files_drive_the_adversary() {
    let text = "# replay the second roster copy, delay every commit\n\
                seed 7\n\
                inband kind=Roster nth=2 -> replay after=3\n\
                inband kind=Commit -> delay ticks=2\n";
    let p = AdversaryPolicy::parse("custom", text).unwrap();
    let r = run_session(3, &p, UserScript::ConfirmAll, 0).unwrap();
    // One roster replay plus the two participants' commits.
    assert_eq!(r.interventions, 3);
    assert!(r.all_imported());
}

#[test]
fn replay_is_harmless() {
    for n in [2, 4, 6] {
        let r = run_session(n, &preset("replay").unwrap(), UserScript::ConfirmAll, 9).unwrap();
        assert!(r.all_imported());
    }
}
