use amq_core::store::{
    deserialize_qf, disk_qf_delete, disk_qf_lookup, read_qf_header, serialize_qf, serialized_pages,
    Access, AccessKind, FileStore, IoAccounting, OnDiskQfHeader, PageStore, SimStore, TracingStore,
};
use amq_core::{Error, Fingerprint, LoadFactor, QfGeometry, QuotientFilter};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const B: usize = 4096;

fn random_filter(q: u32, r: u32, n: u64, seed: u64) -> QuotientFilter {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut qf = QuotientFilter::new(q, r, LoadFactor::THREE_QUARTERS).unwrap();
    for _ in 0..n {
        let v = rng.gen_range(0..1u64 << (q + r));
        qf.insert(Fingerprint::new(v, q + r).unwrap()).unwrap();
    }
    qf
}

#[test]
fn page_round_trip_and_bounds() {
    let mut s = SimStore::new(8, B).unwrap();
    let data: Vec<u8> = (0..B).map(|i| (i % 251) as u8).collect();
    s.write_page(3, &data).unwrap();
    let mut buf = vec![0u8; B];
    s.read_page(3, &mut buf).unwrap();
    assert_eq!(buf, data);
    s.read_page(4, &mut buf).unwrap();
    assert!(buf.iter().all(|&b| b == 0));

    assert!(matches!(
        s.read_page(8, &mut buf),
        Err(Error::OutOfRange {
            index: 8,
            page_count: 8
        })
    ));
    assert!(matches!(
        s.write_page(8, &data),
        Err(Error::OutOfRange { .. })
    ));
    assert!(matches!(
        s.write_page(0, &data[..100]),
        Err(Error::Storage(_))
    ));
    assert!(SimStore::new(1, 16).is_err());
}

#[test]
fn sequential_classification() {
    let mut s = SimStore::new(16, B).unwrap();
    let mut buf = vec![0u8; B];
    for i in [5, 6, 7] {
        s.read_page(i, &mut buf).unwrap();
    }
    let c = s.counters();
    assert_eq!(
        (c.page_reads, c.sequential_reads, c.random_reads),
        (3, 2, 1)
    );
    for i in [5, 6, 7] {
        s.write_page(i, &buf).unwrap();
    }
    let c = s.counters();
    assert_eq!(
        (c.page_writes, c.sequential_writes, c.random_writes),
        (3, 2, 1)
    );
    // Reads and writes are classified independently.
    s.read_page(8, &mut buf).unwrap();
    assert_eq!(s.counters().sequential_reads, 3);
}

#[test]
fn trace_replay_reproduces_counters() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut s = TracingStore::new(SimStore::new(64, 512).unwrap());
    let mut buf = vec![0u8; 512];
    let mut i = 0u64;
    for _ in 0..2000 {
        i = if rng.gen_bool(0.6) {
            (i + 1) % 64
        } else {
            rng.gen_range(0..64)
        };
        if rng.gen_bool(0.5) {
            s.read_page(i, &mut buf).unwrap();
        } else {
            s.write_page(i, &buf).unwrap();
        }
    }
    let c = s.counters();
    assert_eq!(IoAccounting::replay(s.trace()), c);
    assert_eq!(c.page_reads, c.sequential_reads + c.random_reads);
    assert_eq!(c.page_writes, c.sequential_writes + c.random_writes);
}

#[test]
fn file_and_sim_backends_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut f = FileStore::create(dir.path().join("store.bin"), 32, 256).unwrap();
    let mut s = SimStore::new(32, 256).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut a, mut b) = (vec![0u8; 256], vec![0u8; 256]);
    for _ in 0..500 {
        let i = rng.gen_range(0..32);
        if rng.gen_bool(0.5) {
            let data: Vec<u8> = (0..256).map(|_| rng.gen()).collect();
            f.write_page(i, &data).unwrap();
            s.write_page(i, &data).unwrap();
        } else {
            f.read_page(i, &mut a).unwrap();
            s.read_page(i, &mut b).unwrap();
            assert_eq!(a, b);
        }
    }
    assert_eq!(f.counters(), s.counters());
    f.sync().unwrap();
    drop(f);
    let mut reopened = FileStore::open(dir.path().join("store.bin"), 256).unwrap();
    assert_eq!(reopened.page_count(), 32);
    for i in 0..32 {
        reopened.read_page(i, &mut a).unwrap();
        s.read_page(i, &mut b).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn serialization_is_bit_exact() {
    let mut s = SimStore::new(64, B).unwrap();
    let empty = QuotientFilter::new(10, 9, LoadFactor::THREE_QUARTERS).unwrap();
    let span = serialize_qf(&empty, &mut s, 3).unwrap();
    assert_eq!(span.base, 3);
    assert_eq!(deserialize_qf(&mut s, 3).unwrap(), empty);

    let qf = random_filter(12, 10, 3000, 11);
    let before = s.counters();
    let span = serialize_qf(&qf, &mut s, 20).unwrap();
    let d = s.counters() - before;
    assert_eq!(d.page_writes, span.pages);
    assert_eq!(d.random_writes, 1);
    let back = deserialize_qf(&mut s, 20).unwrap();
    assert_eq!(back, qf);
    assert_eq!(back.decode().unwrap(), qf.decode().unwrap());

    let header = read_qf_header(&mut s, 20).unwrap();
    assert_eq!(header, OnDiskQfHeader::for_filter(&qf));
    let mut page = vec![0u8; B];
    s.read_page(20, &mut page).unwrap();
    assert_eq!(&page[..8], b"AMQQFV01");
    assert_eq!(&page[8..12], &[12, 10, 3, 4]);
    assert_eq!(u64::from_le_bytes(page[12..20].try_into().unwrap()), 3000);
    assert!(page[20..].iter().all(|&b| b == 0));
}

#[test]
fn serialized_size_arithmetic() {
    let g = QfGeometry::new(13, 13, LoadFactor::THREE_QUARTERS).unwrap();
    assert_eq!(serialized_pages(g, B), 5);
    let mut s = SimStore::new(5, B).unwrap();
    let qf = QuotientFilter::with_geometry(g);
    assert_eq!(serialize_qf(&qf, &mut s, 0).unwrap().pages, 5);
    assert!(matches!(
        serialize_qf(&qf, &mut s, 1),
        Err(Error::OutOfRange { .. })
    ));
}

#[test]
fn corrupt_header_is_rejected() {
    let mut s = SimStore::new(4, B).unwrap();
    assert!(matches!(
        read_qf_header(&mut s, 0),
        Err(Error::CorruptEncoding(_))
    ));
    let mut page = vec![0u8; B];
    page[..8].copy_from_slice(b"AMQQFV01");
    page[8] = 0;
    page[9] = 4;
    page[10] = 3;
    page[11] = 4;
    s.write_page(0, &page).unwrap();
    assert!(matches!(
        deserialize_qf(&mut s, 0),
        Err(Error::CorruptEncoding(_))
    ));
}

#[test]
fn disk_lookup_matches_memory_and_stays_within_two_pages() {
    let (q, r) = (16, 12);
    let qf = random_filter(q, r, 49_152, 12);
    let g = qf.geometry();
    let mut s = SimStore::new(serialized_pages(g, B), B).unwrap();
    serialize_qf(&qf, &mut s, 0).unwrap();
    let header = read_qf_header(&mut s, 0).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let stored = qf.decode().unwrap();
    let queries = 100_000;
    let mut over_two = 0;
    for i in 0..queries {
        let f = if i % 4 == 0 {
            stored[rng.gen_range(0..stored.len())]
        } else {
            Fingerprint::new(rng.gen_range(0..1u64 << (q + r)), q + r).unwrap()
        };
        let before = s.counters();
        let on_disk = disk_qf_lookup(&mut s, 0, &header, f).unwrap();
        let reads = (s.counters() - before).page_reads;
        assert_eq!(on_disk, qf.may_contain(f).unwrap());
        if !qf.slot(f.value() >> r).occupied {
            assert!(reads <= 1);
        }
        if reads > 2 {
            over_two += 1;
        }
    }
    assert!(
        over_two * 100 <= queries,
        "{over_two} queries read more than two pages"
    );
}

#[test]
fn disk_delete_rewrites_only_the_cluster() {
    let (q, r) = (14, 10);
    let mut qf = random_filter(q, r, 9000, 14);
    let mut s = TracingStore::new(SimStore::new(64, B).unwrap());
    serialize_qf(&qf, &mut s, 2).unwrap();
    let mut header = read_qf_header(&mut s, 2).unwrap();

    let victims: Vec<Fingerprint> = qf.decode().unwrap().into_iter().step_by(37).collect();
    for f in victims {
        s.take_trace();
        disk_qf_delete(&mut s, 2, &mut header, f).unwrap();
        qf.delete(f).unwrap();
        let trace = s.take_trace();
        let reads = trace.iter().filter(|a| a.kind == AccessKind::Read).count();
        let data_writes = trace
            .iter()
            .filter(|a| a.kind == AccessKind::Write && a.index != 2)
            .count();
        assert!(reads <= 2 && data_writes <= 2, "{trace:?}");
        assert_eq!(
            trace.last(),
            Some(&Access {
                kind: AccessKind::Write,
                index: 2
            })
        );
    }
    assert_eq!(deserialize_qf(&mut s, 2).unwrap(), qf);

    let absent = (0..1u64 << (q + r))
        .map(|v| Fingerprint::new(v, q + r).unwrap())
        .find(|f| !qf.may_contain(*f).unwrap())
        .unwrap();
    assert!(matches!(
        disk_qf_delete(&mut s, 2, &mut header, absent),
        Err(Error::DeleteAbsent(_))
    ));
    let wrong = Fingerprint::new(1, 10).unwrap();
    assert!(matches!(
        disk_qf_lookup(&mut s, 2, &header, wrong),
        Err(Error::WidthMismatch { .. })
    ));
}
