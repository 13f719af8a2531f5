use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seapath_core::agents::{ActionRecord, AgentId, ConstraintRecord, PlanRecord};
use seapath_core::Time;
use seapath_distrib::wire::{decode, encode, read_message, FrameError, Message, MAX_FRAME};

fn t(ms: i64) -> Time {
    Time::from_millis(ms)
}

fn constraint(i: i64) -> ConstraintRecord {
    ConstraintRecord {
        loc: format!("e{i}"),
        start: t(1000 * i),
        end: t(1000 * i + 2500),
        owner: AgentId(i as u32),
    }
}

#[test]
fn shutdown_frame() {
    let bytes = encode(&Message::Shutdown);
    let payload = br#"{"type":"shutdown"}"#;
    assert_eq!(&bytes[..4], &(payload.len() as u32).to_be_bytes());
    assert_eq!(&bytes[4..], payload);
    assert_eq!(decode(&bytes).unwrap(), Message::Shutdown);
}

#[test]
fn plan_request_round_trips() {
    let m = Message::PlanRequest {
        request: 7,
        agent: AgentId(2),
        constraints: vec![constraint(1), constraint(2), constraint(3)],
        committed_to: vec![AgentId(1)],
        seed: None,
    };
    assert_eq!(decode(&encode(&m)).unwrap(), m);
}

#[test]
fn times_travel_as_decimal_strings() {
    let m = Message::PlanResponse {
        request: 1,
        cost: t(4000),
        plan: PlanRecord {
            agent: AgentId(1),
            cost: t(4000),
            actions: vec![
                ActionRecord::Move { loc: "e1".into(), t: t(0) },
                ActionRecord::Wait { t: t(2000), d: t(1500) },
            ],
        },
    };
    let text = String::from_utf8(encode(&m)[4..].to_vec()).unwrap();
    assert!(text.contains(r#""cost":"4.000""#), "{text}");
    assert!(text.contains(r#"{"type":"wait","t":"2.000","d":"1.500"}"#), "{text}");
    assert_eq!(decode(&encode(&m)).unwrap(), m);
}

#[test]
fn unknown_fields_are_rejected() {
    let payload = br#"{"type":"hello","agent":1,"extra":true}"#;
    let mut frame = (payload.len() as u32).to_be_bytes().to_vec();
    frame.extend_from_slice(payload);
    assert!(matches!(decode(&frame), Err(FrameError::Malformed(_))));
}

#[test]
fn frame_errors() {
    let good = encode(&Message::Hello { agent: AgentId(3) });
    assert!(matches!(decode(&good[..3]), Err(FrameError::Truncated)));
    assert!(matches!(decode(&good[..good.len() - 1]), Err(FrameError::Truncated)));
    let mut long = good.clone();
    long.push(b' ');
    assert!(matches!(decode(&long), Err(FrameError::Trailing(1))));
    let huge = ((MAX_FRAME + 1) as u32).to_be_bytes();
    assert!(matches!(decode(&huge), Err(FrameError::Oversize(_))));
    assert!(matches!(read_message(&mut &huge[..]), Err(FrameError::Oversize(_))));
    assert!(matches!(read_message(&mut &b""[..]), Err(FrameError::Closed)));
    assert!(matches!(read_message(&mut &good[..5]), Err(FrameError::Truncated)));
}

#[test]
fn random_frames_never_panic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let corpus = [
        encode(&Message::Shutdown),
        encode(&Message::Hello { agent: AgentId(4) }),
        encode(&Message::PlanRequest {
            request: 3,
            agent: AgentId(1),
            constraints: vec![constraint(1)],
            committed_to: vec![],
            seed: None,
        }),
    ];
    for i in 0..10_000 {
        let bytes: Vec<u8> = match i % 3 {
            0 => (0..rng.gen_range(0..64)).map(|_| rng.gen()).collect(),
            1 => {
                // plausible header, random body
                let len = rng.gen_range(0..48u32);
                let mut b = len.to_be_bytes().to_vec();
                b.extend((0..rng.gen_range(0..=len as usize + 2)).map(|_| rng.gen::<u8>()));
                b
            }
            _ => {
                // mutate a valid frame
                let mut b = corpus[rng.gen_range(0..corpus.len())].clone();
                for _ in 0..rng.gen_range(1..4) {
                    let at = rng.gen_range(0..b.len());
                    b[at] = rng.gen();
                }
                b.truncate(rng.gen_range(0..=b.len()));
                b
            }
        };
        let _ = decode(&bytes);
        let _ = read_message(&mut &bytes[..]);
    }
}

fn any_constraint() -> impl Strategy<Value = ConstraintRecord> {
    ("[a-z][a-z0-9_]{0,6}", 0i64..100_000, 1i64..100_000, 0u32..50).prop_map(|(loc, s, d, o)| ConstraintRecord {
        loc,
        start: t(s),
        end: t(s + d),
        owner: AgentId(o),
    })
}

fn any_plan() -> impl Strategy<Value = PlanRecord> {
    let action = prop_oneof![
        ("[a-z][a-z0-9]{0,4}", 0i64..1_000_000).prop_map(|(loc, s)| ActionRecord::Move { loc, t: t(s) }),
        (0i64..1_000_000, 1i64..100_000).prop_map(|(s, d)| ActionRecord::Wait { t: t(s), d: t(d) }),
    ];
    (0u32..50, 0i64..1_000_000, prop::collection::vec(action, 0..8)).prop_map(|(a, c, actions)| PlanRecord {
        agent: AgentId(a),
        cost: t(c),
        actions,
    })
}

fn any_message() -> impl Strategy<Value = Message> {
    let ids = prop::collection::vec((0u32..50).prop_map(AgentId), 0..4);
    prop_oneof![
        (0u32..50).prop_map(|a| Message::Hello { agent: AgentId(a) }),
        (
            any::<u64>(),
            0u32..50,
            prop::collection::vec(any_constraint(), 0..6),
            ids.clone(),
            prop::option::of(any_plan())
        )
            .prop_map(|(request, a, constraints, committed_to, seed)| Message::PlanRequest {
                request,
                agent: AgentId(a),
                constraints,
                committed_to,
                seed,
            }),
        (any::<u64>(), any_plan(), 0i64..1_000_000).prop_map(|(request, plan, c)| Message::PlanResponse {
            request,
            plan,
            cost: t(c)
        }),
        (
            any::<u64>(),
            ids,
            prop::collection::vec(any_plan(), 0..3),
            prop::collection::vec(prop::collection::vec(any_constraint(), 0..3), 0..3)
        )
            .prop_map(|(request, members, seeds, outside)| Message::BlockSolveRequest {
                request,
                members,
                seeds,
                outside,
            }),
        (any::<u64>(), prop::collection::vec(any_plan(), 0..3))
            .prop_map(|(request, plans)| Message::BlockSolveResponse { request, plans }),
        (prop::option::of(any::<u64>()), ".{0,20}").prop_map(|(request, message)| Message::Error { request, message }),
        Just(Message::Shutdown),
    ]
}

proptest! {
    #[test]
    fn decode_inverts_encode(m in any_message()) {
        prop_assert_eq!(decode(&encode(&m)).unwrap(), m.clone());
        let bytes = encode(&m);
        prop_assert_eq!(read_message(&mut &bytes[..]).unwrap(), m);
    }

    #[test]
    fn every_strict_prefix_is_rejected(m in any_message(), cut in any::<prop::sample::Index>()) {
        let bytes = encode(&m);
        let n = cut.index(bytes.len());
        prop_assert!(decode(&bytes[..n]).is_err());
    }
}
