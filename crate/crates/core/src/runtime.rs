//! Small-step execution of fine-grain programs: threads with frame stacks,
//! in-flight messages, and reference-counted mailbox names. The scheduler
//! picks uniformly among enabled redexes using a seed-keyed PRNG, so runs
//! are reproducible.

use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::span::Span;
use crate::syntax::{
    BinOp, Callee, IrClauseKind, IrProgram, IrTerm, IrTermKind, IrValue,
};

/// A suspended continuation: the binder receives the value returned to this
/// frame.
#[derive(Debug, Clone)]
pub struct Frame {
    pub var: String,
    pub cont: IrTerm,
}

#[derive(Debug, Clone)]
pub struct Thread {
    pub id: u32,
    pub term: IrTerm,
    pub stack: Vec<Frame>,
}

impl Thread {
    fn is_done(&self) -> bool {
        matches!(self.term.kind, IrTermKind::Value(_)) && self.stack.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Message {
    pub mailbox: u64,
    pub tag: String,
    pub payloads: Vec<IrValue>,
}

/// Runtime state: threads, in-flight messages, and live mailbox names with
/// reference counts.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub threads: Vec<Thread>,
    pub messages: Vec<Message>,
    pub live: BTreeMap<u64, usize>,
    next_name: u64,
    next_thread: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// Every thread reduced to a value on an empty stack; no messages or
    /// names remain.
    Terminated,
    /// Some thread is not a value and nothing can reduce.
    Deadlock,
    /// A thread reached a guard whose only clause is fail.
    FailGuardHit { mailbox: u64, span: Span },
    /// The step budget ran out with work remaining.
    StepLimit,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: Outcome,
    pub steps: u64,
    pub output: Vec<String>,
    pub trace: Vec<String>,
}

/// One enabled reduction.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Redex {
    /// Return a value into the top frame.
    Return { thread: usize },
    /// A thread-local reduction (let, application, send, spawn, ...).
    Local { thread: usize },
    /// Receive a specific message in a specific clause.
    Recv {
        thread: usize,
        clause: usize,
        message: usize,
    },
    /// Fire the free clause of a guard.
    Free { thread: usize, clause: usize },
}

pub struct Runtime {
    defs: IndexMap<String, (Vec<String>, IrTerm)>,
}

impl Runtime {
    pub fn new(program: &IrProgram) -> Self {
        let defs = program
            .defs
            .iter()
            .map(|d| {
                (
                    d.name.clone(),
                    (
                        d.params.iter().map(|(x, _)| x.clone()).collect(),
                        d.body.clone(),
                    ),
                )
            })
            .collect();
        Runtime { defs }
    }

    /// Initial configuration: a single thread running the program body with
    /// an empty frame stack.
    pub fn load(&self, program: &IrProgram) -> Configuration {
        let mut config = Configuration {
            threads: Vec::new(),
            messages: Vec::new(),
            live: BTreeMap::new(),
            next_name: 0,
            next_thread: 0,
        };
        if let Some(body) = &program.body {
            config.threads.push(Thread {
                id: 0,
                term: body.clone(),
                stack: Vec::new(),
            });
            config.next_thread = 1;
        }
        config
    }

    /// Run to an outcome, collecting printed output and a reduction trace.
    pub fn run(&self, program: &IrProgram, seed: u64, max_steps: u64) -> RunResult {
        let mut config = self.load(program);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut output = Vec::new();
        let mut trace = Vec::new();
        let mut steps = 0u64;
        loop {
            let enabled = self.enabled(&config);
            if enabled.is_empty() {
                let outcome = classify_stuck(&config);
                return RunResult {
                    outcome,
                    steps,
                    output,
                    trace,
                };
            }
            if steps >= max_steps {
                return RunResult {
                    outcome: Outcome::StepLimit,
                    steps,
                    output,
                    trace,
                };
            }
            let choice = enabled[rng.gen_range(0..enabled.len())].clone();
            let line = self.apply(&mut config, &choice, &mut output);
            trace.push(format!("{steps} {line}"));
            steps += 1;
            debug_assert_eq!(
                recount(&config),
                config.live,
                "reference counts diverged after {line}"
            );
        }
    }

    fn enabled(&self, config: &Configuration) -> Vec<Redex> {
        let mut out = Vec::new();
        for (i, th) in config.threads.iter().enumerate() {
            match &th.term.kind {
                IrTermKind::Value(_) => {
                    if !th.stack.is_empty() {
                        out.push(Redex::Return { thread: i });
                    }
                }
                IrTermKind::Let { .. }
                | IrTermKind::New { .. }
                | IrTermKind::Spawn(_)
                | IrTermKind::Builtin { .. } => out.push(Redex::Local { thread: i }),
                IrTermKind::LetPair { subject, .. } => {
                    if matches!(subject, IrValue::Pair(..)) {
                        out.push(Redex::Local { thread: i });
                    }
                }
                IrTermKind::Case { subject, .. } => {
                    if matches!(subject, IrValue::Inl(_) | IrValue::Inr(_)) {
                        out.push(Redex::Local { thread: i });
                    }
                }
                IrTermKind::If { cond, .. } => {
                    if matches!(cond, IrValue::Bool(_)) {
                        out.push(Redex::Local { thread: i });
                    }
                }
                IrTermKind::BinOp { lhs, rhs, .. } => {
                    if matches!(lhs, IrValue::Int(_)) && matches!(rhs, IrValue::Int(_)) {
                        out.push(Redex::Local { thread: i });
                    }
                }
                IrTermKind::App { callee, .. } => match callee {
                    Callee::Def(name) => {
                        if self.defs.contains_key(name.as_str()) {
                            out.push(Redex::Local { thread: i });
                        }
                    }
                    Callee::Val(IrValue::Lambda { .. }) => {
                        out.push(Redex::Local { thread: i })
                    }
                    Callee::Val(_) => {}
                },
                IrTermKind::Send { target, .. } => {
                    if matches!(target, IrValue::Name(_)) {
                        out.push(Redex::Local { thread: i });
                    }
                }
                IrTermKind::Guard {
                    subject, clauses, ..
                } => {
                    let IrValue::Name(a) = subject else {
                        continue;
                    };
                    for (ci, c) in clauses.iter().enumerate() {
                        match &c.kind {
                            IrClauseKind::Receive { tag, .. } => {
                                for (mi, m) in config.messages.iter().enumerate() {
                                    if m.mailbox == *a && &m.tag == tag {
                                        out.push(Redex::Recv {
                                            thread: i,
                                            clause: ci,
                                            message: mi,
                                        });
                                    }
                                }
                            }
                            IrClauseKind::Free { .. } => {
                                let queued =
                                    config.messages.iter().any(|m| m.mailbox == *a);
                                let refs =
                                    config.live.get(a).copied().unwrap_or(0);
                                if !queued && refs == 1 {
                                    out.push(Redex::Free {
                                        thread: i,
                                        clause: ci,
                                    });
                                }
                            }
                            IrClauseKind::Fail => {}
                        }
                    }
                }
            }
        }
        out
    }

    /// Apply one redex, maintaining reference counts; returns the trace
    /// line.
    fn apply(
        &self,
        config: &mut Configuration,
        redex: &Redex,
        output: &mut Vec<String>,
    ) -> String {
        match redex {
            Redex::Return { thread } => {
                let th = &mut config.threads[*thread];
                let before = count_thread(th);
                let IrTermKind::Value(v) = th.term.kind.clone() else {
                    unreachable!()
                };
                let frame = th.stack.pop().expect("return needs a frame");
                let mut map = HashMap::new();
                map.insert(frame.var.clone(), v);
                th.term = subst_term(&frame.cont, &map);
                let id = th.id;
                let after = count_thread(&config.threads[*thread]);
                apply_delta(&mut config.live, before, after);
                format!("t{id} return")
            }
            Redex::Local { thread } => self.apply_local(config, *thread, output),
            Redex::Recv {
                thread,
                clause,
                message,
            } => {
                let msg = config.messages.remove(*message);
                let th = &mut config.threads[*thread];
                let id = th.id;
                let mut before = count_thread(th);
                // the message's address and payload references are consumed
                *before.entry(msg.mailbox).or_insert(0) += 1;
                count_value_names(&msg.payloads, &mut before);
                let IrTermKind::Guard {
                    subject, clauses, ..
                } = &th.term.kind
                else {
                    unreachable!()
                };
                let IrValue::Name(a) = subject else {
                    unreachable!()
                };
                let IrClauseKind::Receive {
                    tag,
                    params,
                    rebind,
                    body,
                } = &clauses[*clause].kind
                else {
                    unreachable!()
                };
                let mut map = HashMap::new();
                for (x, v) in params.iter().zip(msg.payloads.iter()) {
                    map.insert(x.clone(), v.clone());
                }
                map.insert(rebind.clone(), IrValue::Name(*a));
                let tag = tag.clone();
                th.term = subst_term(body, &map);
                let after = count_thread(&config.threads[*thread]);
                apply_delta(&mut config.live, before, after);
                format!("t{id} recv {tag} a{}", msg.mailbox)
            }
            Redex::Free { thread, clause } => {
                let th = &mut config.threads[*thread];
                let id = th.id;
                let before = count_thread(th);
                let IrTermKind::Guard {
                    subject, clauses, ..
                } = &th.term.kind
                else {
                    unreachable!()
                };
                let IrValue::Name(a) = *subject else {
                    unreachable!()
                };
                let IrClauseKind::Free { body } = &clauses[*clause].kind else {
                    unreachable!()
                };
                th.term = (**body).clone();
                let after = count_thread(&config.threads[*thread]);
                apply_delta(&mut config.live, before, after);
                debug_assert!(!config.live.contains_key(&a), "freed name still referenced");
                format!("t{id} free a{a}")
            }
        }
    }

    fn apply_local(
        &self,
        config: &mut Configuration,
        thread: usize,
        output: &mut Vec<String>,
    ) -> String {
        let th = &mut config.threads[thread];
        let id = th.id;
        let before = count_thread(th);
        let mut new_messages: Vec<Message> = Vec::new();
        let mut spawned: Option<IrTerm> = None;
        let mut fresh_name: Option<u64> = None;

        let line = match th.term.kind.clone() {
            IrTermKind::Let {
                var,
                subject,
                body,
                ..
            } => {
                th.stack.push(Frame {
                    var,
                    cont: *body,
                });
                th.term = *subject;
                format!("t{id} let")
            }
            IrTermKind::LetPair {
                left,
                right,
                subject,
                body,
                ..
            } => {
                let IrValue::Pair(a, b) = subject else {
                    unreachable!()
                };
                let mut map = HashMap::new();
                map.insert(left, *a);
                map.insert(right, *b);
                th.term = subst_term(&body, &map);
                format!("t{id} split")
            }
            IrTermKind::Case {
                subject,
                left_var,
                left_body,
                right_var,
                right_body,
                ..
            } => {
                let mut map = HashMap::new();
                let (body, which) = match subject {
                    IrValue::Inl(v) => {
                        map.insert(left_var, *v);
                        (left_body, "inl")
                    }
                    IrValue::Inr(v) => {
                        map.insert(right_var, *v);
                        (right_body, "inr")
                    }
                    _ => unreachable!(),
                };
                th.term = subst_term(&body, &map);
                format!("t{id} case {which}")
            }
            IrTermKind::If {
                cond,
                then_body,
                else_body,
            } => {
                let IrValue::Bool(b) = cond else {
                    unreachable!()
                };
                th.term = if b { *then_body } else { *else_body };
                format!("t{id} if {b}")
            }
            IrTermKind::App { callee, args, .. } => match callee {
                Callee::Def(name) => {
                    let (params, body) = self.defs[name.as_str()].clone();
                    let mut map = HashMap::new();
                    for (x, v) in params.into_iter().zip(args) {
                        map.insert(x, v);
                    }
                    th.term = subst_term(&body, &map);
                    format!("t{id} call {name}")
                }
                Callee::Val(IrValue::Lambda { params, body, .. }) => {
                    let mut map = HashMap::new();
                    for ((x, _), v) in params.into_iter().zip(args) {
                        map.insert(x, v);
                    }
                    th.term = subst_term(&body, &map);
                    format!("t{id} apply")
                }
                Callee::Val(_) => unreachable!(),
            },
            IrTermKind::Builtin { name, args } => {
                let result = match (name.as_str(), args.as_slice()) {
                    ("print", [IrValue::Str(s)]) => {
                        output.push(s.clone());
                        IrValue::Unit
                    }
                    ("intToString", [IrValue::Int(n)]) => IrValue::Str(n.to_string()),
                    _ => unreachable!("builtin shapes checked statically"),
                };
                th.term = IrTerm::new(IrTermKind::Value(result), th.term.span);
                format!("t{id} {name}")
            }
            IrTermKind::BinOp { op, lhs, rhs } => {
                let (IrValue::Int(a), IrValue::Int(b)) = (lhs, rhs) else {
                    unreachable!()
                };
                let result = match op {
                    BinOp::Add => IrValue::Int(a.wrapping_add(b)),
                    BinOp::Sub => IrValue::Int(a.wrapping_sub(b)),
                    BinOp::Mul => IrValue::Int(a.wrapping_mul(b)),
                    BinOp::Less => IrValue::Bool(a < b),
                };
                th.term = IrTerm::new(IrTermKind::Value(result), th.term.span);
                format!("t{id} arith")
            }
            IrTermKind::New { .. } => {
                let a = config.next_name;
                config.next_name += 1;
                fresh_name = Some(a);
                th.term = IrTerm::new(IrTermKind::Value(IrValue::Name(a)), th.term.span);
                format!("t{id} new a{a}")
            }
            IrTermKind::Spawn(body) => {
                spawned = Some(*body);
                th.term = IrTerm::new(IrTermKind::Value(IrValue::Unit), th.term.span);
                format!("t{id} spawn")
            }
            IrTermKind::Send {
                target, tag, args, ..
            } => {
                let IrValue::Name(a) = target else {
                    unreachable!()
                };
                new_messages.push(Message {
                    mailbox: a,
                    tag: tag.clone(),
                    payloads: args,
                });
                th.term = IrTerm::new(IrTermKind::Value(IrValue::Unit), th.term.span);
                format!("t{id} send {tag} a{a}")
            }
            IrTermKind::Value(_) | IrTermKind::Guard { .. } => unreachable!(),
        };

        let mut after = count_thread(&config.threads[thread]);
        if let Some(body) = spawned {
            let tid = config.next_thread;
            config.next_thread += 1;
            count_term_names(&body, &mut after);
            config.threads.push(Thread {
                id: tid,
                term: body,
                stack: Vec::new(),
            });
        }
        for m in &new_messages {
            *after.entry(m.mailbox).or_insert(0) += 1;
            count_value_names(&m.payloads, &mut after);
        }
        config.messages.extend(new_messages);
        if let Some(a) = fresh_name {
            config.live.insert(a, 0);
        }
        apply_delta(&mut config.live, before, after);
        line
    }
}

/// Classify a configuration with no enabled redexes.
fn classify_stuck(config: &Configuration) -> Outcome {
    for th in &config.threads {
        if let IrTermKind::Guard {
            subject, clauses, ..
        } = &th.term.kind
        {
            if clauses.len() == 1 && matches!(clauses[0].kind, IrClauseKind::Fail) {
                if let IrValue::Name(a) = subject {
                    return Outcome::FailGuardHit {
                        mailbox: *a,
                        span: th.term.span,
                    };
                }
            }
        }
    }
    let all_done = config.threads.iter().all(Thread::is_done);
    if all_done && config.messages.is_empty() && config.live.is_empty() {
        Outcome::Terminated
    } else {
        Outcome::Deadlock
    }
}

/// The progress characterisation: in a deadlocked configuration every
/// non-value thread is a guard waiting on tags with no matching pending
/// message.
pub fn deadlock_is_characterised(config: &Configuration) -> bool {
    config.threads.iter().all(|th| {
        if th.is_done() {
            return true;
        }
        match &th.term.kind {
            IrTermKind::Guard {
                subject, clauses, ..
            } => {
                let IrValue::Name(a) = subject else {
                    return false;
                };
                clauses.iter().all(|c| match &c.kind {
                    IrClauseKind::Receive { tag, .. } => !config
                        .messages
                        .iter()
                        .any(|m| m.mailbox == *a && &m.tag == tag),
                    _ => true,
                })
            }
            _ => false,
        }
    })
}

// -- reference counting -----------------------------------------------------

type Counts = BTreeMap<u64, usize>;

fn apply_delta(live: &mut Counts, before: Counts, after: Counts) {
    for (name, n) in before {
        let e = live.get_mut(&name).expect("name was counted live");
        *e -= n;
    }
    for (name, n) in after {
        *live.entry(name).or_insert(0) += n;
    }
    live.retain(|_, n| *n > 0);
}

fn count_thread(th: &Thread) -> Counts {
    let mut acc = Counts::new();
    count_term_names(&th.term, &mut acc);
    for f in &th.stack {
        count_term_names(&f.cont, &mut acc);
    }
    acc
}

/// Recompute all reference counts from scratch; the runtime asserts this
/// agrees with the maintained counts after every step.
pub fn recount(config: &Configuration) -> Counts {
    let mut acc = Counts::new();
    for th in &config.threads {
        let c = count_thread(th);
        for (k, v) in c {
            *acc.entry(k).or_insert(0) += v;
        }
    }
    for m in &config.messages {
        *acc.entry(m.mailbox).or_insert(0) += 1;
        count_value_names(&m.payloads, &mut acc);
    }
    acc
}

fn count_value_names(vs: &[IrValue], acc: &mut Counts) {
    for v in vs {
        count_value(v, acc);
    }
}

fn count_value(v: &IrValue, acc: &mut Counts) {
    match v {
        IrValue::Name(a) => *acc.entry(*a).or_insert(0) += 1,
        IrValue::Pair(a, b) => {
            count_value(a, acc);
            count_value(b, acc);
        }
        IrValue::Inl(a) | IrValue::Inr(a) => count_value(a, acc),
        IrValue::Lambda { body, .. } => count_term_names(body, acc),
        _ => {}
    }
}

fn count_term_names(t: &IrTerm, acc: &mut Counts) {
    match &t.kind {
        IrTermKind::Value(v) => count_value(v, acc),
        IrTermKind::Let { subject, body, .. } => {
            count_term_names(subject, acc);
            count_term_names(body, acc);
        }
        IrTermKind::LetPair { subject, body, .. } => {
            count_value(subject, acc);
            count_term_names(body, acc);
        }
        IrTermKind::Case {
            subject,
            left_body,
            right_body,
            ..
        } => {
            count_value(subject, acc);
            count_term_names(left_body, acc);
            count_term_names(right_body, acc);
        }
        IrTermKind::If {
            cond,
            then_body,
            else_body,
        } => {
            count_value(cond, acc);
            count_term_names(then_body, acc);
            count_term_names(else_body, acc);
        }
        IrTermKind::App { callee, args, .. } => {
            if let Callee::Val(v) = callee {
                count_value(v, acc);
            }
            count_value_names(args, acc);
        }
        IrTermKind::Builtin { args, .. } => count_value_names(args, acc),
        IrTermKind::BinOp { lhs, rhs, .. } => {
            count_value(lhs, acc);
            count_value(rhs, acc);
        }
        IrTermKind::Spawn(body) => count_term_names(body, acc),
        IrTermKind::New { .. } => {}
        IrTermKind::Send { target, args, .. } => {
            count_value(target, acc);
            count_value_names(args, acc);
        }
        IrTermKind::Guard {
            subject, clauses, ..
        } => {
            count_value(subject, acc);
            for c in clauses {
                match &c.kind {
                    IrClauseKind::Receive { body, .. } | IrClauseKind::Free { body } => {
                        count_term_names(body, acc)
                    }
                    IrClauseKind::Fail => {}
                }
            }
        }
    }
}

// -- substitution -------------------------------------------------------------

fn subst_value(v: &IrValue, map: &HashMap<String, IrValue>) -> IrValue {
    match v {
        IrValue::Var(x) => map.get(x).cloned().unwrap_or_else(|| v.clone()),
        IrValue::Pair(a, b) => IrValue::Pair(
            Box::new(subst_value(a, map)),
            Box::new(subst_value(b, map)),
        ),
        IrValue::Inl(a) => IrValue::Inl(Box::new(subst_value(a, map))),
        IrValue::Inr(a) => IrValue::Inr(Box::new(subst_value(a, map))),
        IrValue::Lambda {
            linear,
            params,
            ret,
            body,
        } => {
            let mut inner = map.clone();
            for (x, _) in params {
                inner.remove(x);
            }
            IrValue::Lambda {
                linear: *linear,
                params: params.clone(),
                ret: ret.clone(),
                body: Box::new(subst_term(body, &inner)),
            }
        }
        _ => v.clone(),
    }
}

fn subst_term(t: &IrTerm, map: &HashMap<String, IrValue>) -> IrTerm {
    let span = t.span;
    let kind = match &t.kind {
        IrTermKind::Value(v) => IrTermKind::Value(subst_value(v, map)),
        IrTermKind::Let {
            var,
            ann,
            subject,
            body,
        } => {
            let subject = subst_term(subject, map);
            let mut inner = map.clone();
            inner.remove(var);
            IrTermKind::Let {
                var: var.clone(),
                ann: ann.clone(),
                subject: Box::new(subject),
                body: Box::new(subst_term(body, &inner)),
            }
        }
        IrTermKind::LetPair {
            left,
            right,
            ann,
            subject,
            body,
        } => {
            let subject = subst_value(subject, map);
            let mut inner = map.clone();
            inner.remove(left);
            inner.remove(right);
            IrTermKind::LetPair {
                left: left.clone(),
                right: right.clone(),
                ann: ann.clone(),
                subject,
                body: Box::new(subst_term(body, &inner)),
            }
        }
        IrTermKind::Case {
            subject,
            left_var,
            left_ann,
            left_body,
            right_var,
            right_ann,
            right_body,
        } => {
            let subject = subst_value(subject, map);
            let mut lmap = map.clone();
            lmap.remove(left_var);
            let mut rmap = map.clone();
            rmap.remove(right_var);
            IrTermKind::Case {
                subject,
                left_var: left_var.clone(),
                left_ann: left_ann.clone(),
                left_body: Box::new(subst_term(left_body, &lmap)),
                right_var: right_var.clone(),
                right_ann: right_ann.clone(),
                right_body: Box::new(subst_term(right_body, &rmap)),
            }
        }
        IrTermKind::If {
            cond,
            then_body,
            else_body,
        } => IrTermKind::If {
            cond: subst_value(cond, map),
            then_body: Box::new(subst_term(then_body, map)),
            else_body: Box::new(subst_term(else_body, map)),
        },
        IrTermKind::App {
            callee,
            args,
            fn_ty,
        } => IrTermKind::App {
            callee: match callee {
                Callee::Def(n) => Callee::Def(n.clone()),
                Callee::Val(v) => Callee::Val(subst_value(v, map)),
            },
            args: args.iter().map(|a| subst_value(a, map)).collect(),
            fn_ty: fn_ty.clone(),
        },
        IrTermKind::Builtin { name, args } => IrTermKind::Builtin {
            name: name.clone(),
            args: args.iter().map(|a| subst_value(a, map)).collect(),
        },
        IrTermKind::BinOp { op, lhs, rhs } => IrTermKind::BinOp {
            op: *op,
            lhs: subst_value(lhs, map),
            rhs: subst_value(rhs, map),
        },
        IrTermKind::Spawn(body) => IrTermKind::Spawn(Box::new(subst_term(body, map))),
        IrTermKind::New { iface } => IrTermKind::New {
            iface: iface.clone(),
        },
        IrTermKind::Send {
            target,
            tag,
            args,
            iface,
        } => IrTermKind::Send {
            target: subst_value(target, map),
            tag: tag.clone(),
            args: args.iter().map(|a| subst_value(a, map)).collect(),
            iface: iface.clone(),
        },
        IrTermKind::Guard {
            subject,
            pattern,
            clauses,
            iface,
        } => IrTermKind::Guard {
            subject: subst_value(subject, map),
            pattern: pattern.clone(),
            clauses: clauses
                .iter()
                .map(|c| crate::syntax::IrClause {
                    kind: match &c.kind {
                        IrClauseKind::Receive {
                            tag,
                            params,
                            rebind,
                            body,
                        } => {
                            let mut inner = map.clone();
                            for p in params {
                                inner.remove(p);
                            }
                            inner.remove(rebind);
                            IrClauseKind::Receive {
                                tag: tag.clone(),
                                params: params.clone(),
                                rebind: rebind.clone(),
                                body: Box::new(subst_term(body, &inner)),
                            }
                        }
                        IrClauseKind::Free { body } => IrClauseKind::Free {
                            body: Box::new(subst_term(body, map)),
                        },
                        IrClauseKind::Fail => IrClauseKind::Fail,
                    },
                    span: c.span,
                })
                .collect(),
            iface: iface.clone(),
        },
    };
    IrTerm::new(kind, span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{desugar, parse_program, to_ir};

    fn load_src(src: &str) -> (Runtime, IrProgram) {
        let p = parse_program(src).unwrap();
        let ir = to_ir(&desugar(&p));
        (Runtime::new(&ir), ir)
    }

    #[test]
    fn empty_program_terminates_immediately() {
        let (rt, ir) = load_src("def unused(): Unit { () }");
        let result = rt.run(&ir, 0, 100);
        assert_eq!(result.outcome, Outcome::Terminated);
        assert_eq!(result.steps, 0);
    }

    #[test]
    fn immediate_free_terminates() {
        let (rt, ir) = load_src("interface I { M() } free(new[I])");
        for seed in 0..5 {
            let result = rt.run(&ir, seed, 1000);
            assert_eq!(result.outcome, Outcome::Terminated, "seed {seed}");
        }
    }

    #[test]
    fn max_steps_zero_hits_limit() {
        let (rt, ir) = load_src("interface I { M() } free(new[I])");
        let result = rt.run(&ir, 0, 0);
        assert_eq!(result.outcome, Outcome::StepLimit);
    }

    #[test]
    fn fail_guard_is_reported() {
        let (rt, ir) = load_src("interface I { M() } fail(new[I])");
        let result = rt.run(&ir, 7, 1000);
        assert!(matches!(result.outcome, Outcome::FailGuardHit { .. }));
    }

    #[test]
    fn send_then_receive_delivers_payload() {
        let src = r#"
interface Cell { Put(Int) }
def reader(self: Cell?(Put)): Unit {
  guard self: Put {
    receive Put(n) from self ->
      free(self);
      print(intToString(n))
  }
}
def main(): Unit {
  let cell = new[Cell] in
  cell ! Put(42);
  reader(cell)
}
main()
"#;
        let (rt, ir) = load_src(src);
        for seed in 0..10 {
            let result = rt.run(&ir, seed, 10_000);
            assert_eq!(result.outcome, Outcome::Terminated, "seed {seed}");
            assert_eq!(result.output, vec!["42".to_string()]);
        }
    }

    #[test]
    fn blocked_receive_without_sender_deadlocks() {
        let src = r#"
interface I { M() }
def main(): Unit {
  let mb = new[I] in
  guard mb: M {
    receive M() from mb2 -> free(mb2)
  }
}
main()
"#;
        let (rt, ir) = load_src(src);
        let result = rt.run(&ir, 3, 1000);
        assert_eq!(result.outcome, Outcome::Deadlock);
    }

    #[test]
    fn traces_are_deterministic_per_seed() {
        let src = r#"
interface Cell { Put(Int) }
def writer(cell: Cell!, n: Int): Unit { cell ! Put(n) }
def main(): Unit {
  let c1 = new[Cell] in
  spawn { writer(c1, 1) };
  guard c1: Put {
    receive Put(a) from c ->
      free(c);
      print(intToString(a))
  }
}
main()
"#;
        let (rt, ir) = load_src(src);
        let a = rt.run(&ir, 42, 10_000);
        let b = rt.run(&ir, 42, 10_000);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.output, b.output);
        // different seeds may reorder, but outcomes stay clean
        let c = rt.run(&ir, 43, 10_000);
        assert_eq!(c.outcome, Outcome::Terminated);
    }

    #[test]
    fn free_waits_for_other_references() {
        // the spawned thread holds a reference; free only fires after the
        // spawned send has executed and the message was consumed
        let src = r#"
interface I { M() }
def main(): Unit {
  let mb = new[I] in
  spawn { mb ! M() };
  guard mb: *M {
    free -> ()
    receive M() from mb2 ->
      guard mb2: *M { free -> () }
  }
}
main()
"#;
        let (rt, ir) = load_src(src);
        for seed in 0..20 {
            let result = rt.run(&ir, seed, 10_000);
            assert_eq!(result.outcome, Outcome::Terminated, "seed {seed}");
        }
    }

    #[test]
    fn deadlocked_configurations_are_characterised() {
        let src = r#"
interface I { M(), N() }
def main(): Unit {
  let mb = new[I] in
  mb ! N();
  guard mb: M {
    receive M() from mb2 -> free(mb2)
  }
}
main()
"#;
        let (rt, ir) = load_src(src);
        let mut config = rt.load(&ir);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        loop {
            let enabled = rt.enabled(&config);
            if enabled.is_empty() {
                break;
            }
            let r = enabled[rng.gen_range(0..enabled.len())].clone();
            rt.apply(&mut config, &r, &mut Vec::new());
        }
        assert_eq!(classify_stuck(&config), Outcome::Deadlock);
        assert!(deadlock_is_characterised(&config));
    }

    #[test]
    fn reference_counts_match_recount_along_a_run() {
        let src = r#"
interface Cell { Put(Int), Get(Client!) }
interface Client { Reply(Int) }
def cell(self: Cell?(Put . *Get), value: Int): Unit {
  guard self: Put . *Get {
    receive Put(n) from self -> full(self, n)
  }
}
def full(self: Cell?(*Get), value: Int): Unit {
  guard self: *Get {
    free -> ()
    receive Get(client) from self ->
      client ! Reply(value);
      full(self, value)
  }
}
def main(): Unit {
  let c = new[Cell] in
  spawn { cell(c, 0) };
  let me = new[Client] in
  c ! Put(5);
  c ! Get(me);
  guard me: Reply {
    receive Reply(r) from me2 ->
      free(me2);
      print(intToString(r))
  }
}
main()
"#;
        let (rt, ir) = load_src(src);
        let mut config = rt.load(&ir);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut out = Vec::new();
        for _ in 0..10_000 {
            let enabled = rt.enabled(&config);
            if enabled.is_empty() {
                break;
            }
            let r = enabled[rng.gen_range(0..enabled.len())].clone();
            rt.apply(&mut config, &r, &mut out);
            assert_eq!(recount(&config), config.live, "counts diverged");
        }
        assert_eq!(classify_stuck(&config), Outcome::Terminated);
        assert_eq!(out, vec!["5".to_string()]);
    }
}
