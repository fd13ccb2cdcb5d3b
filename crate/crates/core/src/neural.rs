//! Actor-critic agents built from the dense layers in [`crate::nn`].
//!
//! A sender looks up the state embedding, runs it through the shared
//! processor and the sender projection, and samples from the masked
//! softmax. A receiver does the same with the symbol embedding and the
//! receiver projection. The critic is shared by both roles and reads the
//! embedding before the processor. Negation-identity and meaning choices
//! come from their own MLPs fed a constant all-ones input, each paired with
//! a critic that scores the selected option.
//!
//! Every output is a function of a small set of discrete inputs, so after
//! each learning step the agent tabulates its policies for all states and
//! symbols; acting is then a table lookup plus one softmax draw.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NumericError, Result, SimError};
use crate::game::{Agent, Decision, EpisodeRecord, GameConfig, GameKind, Mask, Meaning, Role};
use crate::nn::{
    masked_softmax, masked_softmax_sample, ppo_update, ActorCritic, AdamConfig, AdamState,
    EpochLoss, Evaluation, Linear, MlpBlock, MlpCache, Parameters, PpoConfig, Tensor, Transition,
};

pub const HEAD_SENDER: usize = 0;
pub const HEAD_RECEIVER: usize = 1;
pub const HEAD_NEGATION: usize = 2;
pub const HEAD_MEANING: usize = 3;

/// Baseline used for the advantage of negation-identity and meaning
/// choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChoiceBaseline {
    /// The critic's score of the option that was selected.
    Selected,
    /// The critic's scores averaged under the current choice distribution.
    Expected,
}

impl std::str::FromStr for ChoiceBaseline {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "selected" => Ok(ChoiceBaseline::Selected),
            "expected" => Ok(ChoiceBaseline::Expected),
            other => Err(format!("unknown choice baseline `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuralConfig {
    pub width: usize,
    pub depth: usize,
    pub adam: AdamConfig,
    pub ppo: PpoConfig,
    /// Start every policy and value head at exactly zero output.
    pub zero_init_heads: bool,
    pub choice_baseline: ChoiceBaseline,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        NeuralConfig {
            width: 128,
            depth: 5,
            adam: AdamConfig::default(),
            ppo: PpoConfig::default(),
            zero_init_heads: true,
            choice_baseline: ChoiceBaseline::Selected,
        }
    }
}

/// Policy MLP over a fixed set of options plus a critic that scores a
/// selected option through its own embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceHeads {
    pub policy: MlpBlock,
    pub critic_embedding: Tensor,
    pub critic: MlpBlock,
}

impl ChoiceHeads {
    fn new<R: Rng + ?Sized>(options: usize, cfg: &NeuralConfig, rng: &mut R) -> Self {
        ChoiceHeads {
            policy: MlpBlock::new(cfg.width, cfg.depth, Some(options), cfg.zero_init_heads, rng),
            critic_embedding: embedding(options, cfg.width, rng),
            critic: MlpBlock::new(cfg.width, cfg.depth, Some(1), cfg.zero_init_heads, rng),
        }
    }

    fn options(&self) -> usize {
        self.critic_embedding.rows()
    }
}

impl Parameters for ChoiceHeads {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.policy.tensors();
        v.push(&self.critic_embedding);
        v.extend(self.critic.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.policy.tensors_mut();
        v.push(&mut self.critic_embedding);
        v.extend(self.critic.tensors_mut());
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralParams {
    pub sender_embedding: Tensor,
    pub receiver_embedding: Tensor,
    pub processor: MlpBlock,
    pub sender_projection: Linear,
    pub receiver_projection: Linear,
    pub critic: MlpBlock,
    pub negation: Option<ChoiceHeads>,
    pub function: Option<ChoiceHeads>,
}

impl Parameters for NeuralParams {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut v = vec![&self.sender_embedding, &self.receiver_embedding];
        v.extend(self.processor.tensors());
        v.extend(self.sender_projection.tensors());
        v.extend(self.receiver_projection.tensors());
        v.extend(self.critic.tensors());
        if let Some(h) = &self.negation {
            v.extend(h.tensors());
        }
        if let Some(h) = &self.function {
            v.extend(h.tensors());
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.sender_embedding, &mut self.receiver_embedding];
        v.extend(self.processor.tensors_mut());
        v.extend(self.sender_projection.tensors_mut());
        v.extend(self.receiver_projection.tensors_mut());
        v.extend(self.critic.tensors_mut());
        if let Some(h) = &mut self.negation {
            v.extend(h.tensors_mut());
        }
        if let Some(h) = &mut self.function {
            v.extend(h.tensors_mut());
        }
        v
    }
}

fn embedding<R: Rng + ?Sized>(rows: usize, width: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (rows + width) as f64).sqrt();
    let data = (0..rows * width)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    Tensor::from_vec(&[rows, width], data).expect("shape")
}

/// The trainable network of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub game: GameConfig,
    pub params: NeuralParams,
}

impl PolicyNet {
    pub fn new<R: Rng + ?Sized>(game: GameConfig, cfg: &NeuralConfig, rng: &mut R) -> Self {
        let w = cfg.width;
        let zero = cfg.zero_init_heads;
        let projection = |out: usize, rng: &mut R| {
            if zero {
                Linear::zeros(w, out)
            } else {
                Linear::new(w, out, rng)
            }
        };
        let sender_embedding = embedding(game.num_states, w, rng);
        let receiver_embedding = embedding(game.num_symbols, w, rng);
        let processor = MlpBlock::new(w, cfg.depth, None, false, rng);
        let sender_projection = projection(game.sender_width(), rng);
        let receiver_projection = projection(game.num_states, rng);
        let critic = MlpBlock::new(w, cfg.depth, Some(1), zero, rng);
        let negation = game
            .kind
            .learns_identity()
            .then(|| ChoiceHeads::new(game.num_symbols, cfg, rng));
        let function = (game.kind == GameKind::CombinedNegation)
            .then(|| ChoiceHeads::new(Meaning::ALL.len(), cfg, rng));
        PolicyNet {
            game,
            params: NeuralParams {
                sender_embedding,
                receiver_embedding,
                processor,
                sender_projection,
                receiver_projection,
                critic,
                negation,
                function,
            },
        }
    }

    fn width(&self) -> usize {
        self.params.sender_embedding.cols()
    }

    fn static_input(&self) -> Tensor {
        Tensor::filled(&[1, self.width()], 1.0)
    }

    fn choice_heads(&self, head: usize) -> Option<&ChoiceHeads> {
        match head {
            HEAD_NEGATION => self.params.negation.as_ref(),
            HEAD_MEANING => self.params.function.as_ref(),
            _ => None,
        }
    }

    /// Tabulates logits and values for every state, symbol and option.
    pub fn tabulate(&self) -> std::result::Result<PolicyTable, NumericError> {
        let p = &self.params;
        let states: Vec<usize> = (0..self.game.num_states).collect();
        let symbols: Vec<usize> = (0..self.game.num_symbols).collect();
        let roles = self.role_pass(&states, &symbols)?;
        let choice = |heads: &Option<ChoiceHeads>| -> std::result::Result<_, NumericError> {
            match heads {
                None => Ok(None),
                Some(h) => {
                    let all: Vec<usize> = (0..h.options()).collect();
                    let pass = choice_pass(h, &self.static_input(), &all)?;
                    Ok(Some(ChoiceTable {
                        logits: pass.logits.data().to_vec(),
                        scores: pass.values.data().to_vec(),
                    }))
                }
            }
        };
        Ok(PolicyTable {
            sender_logits: roles.sender_logits,
            sender_values: roles.values.data()[..states.len()].to_vec(),
            receiver_logits: roles.receiver_logits,
            receiver_values: roles.values.data()[states.len()..].to_vec(),
            negation: choice(&p.negation)?,
            meaning: choice(&p.function)?,
        })
    }

    /// Processor, projections and critic for the given state and symbol
    /// rows, stacked senders first.
    fn role_pass(
        &self,
        states: &[usize],
        symbols: &[usize],
    ) -> std::result::Result<RolePass, NumericError> {
        let p = &self.params;
        let send = p.sender_embedding.gather_rows(states);
        let recv = p.receiver_embedding.gather_rows(symbols);
        let width = send.cols();
        let mut data = send.data().to_vec();
        data.extend_from_slice(recv.data());
        let input = Tensor::from_vec(&[states.len() + symbols.len(), width], data)?;

        let (hidden, processor_cache) = p.processor.forward(&input)?;
        let sender_rows: Vec<usize> = (0..states.len()).collect();
        let receiver_rows: Vec<usize> = (states.len()..states.len() + symbols.len()).collect();
        let sender_hidden = hidden.gather_rows(&sender_rows);
        let receiver_hidden = hidden.gather_rows(&receiver_rows);
        let sender_logits = p.sender_projection.forward(&sender_hidden);
        let receiver_logits = p.receiver_projection.forward(&receiver_hidden);
        let (values, critic_cache) = p.critic.forward(&input)?;
        Ok(RolePass {
            input,
            sender_hidden,
            receiver_hidden,
            sender_logits,
            receiver_logits,
            values,
            processor_cache,
            critic_cache,
        })
    }
}

struct RolePass {
    input: Tensor,
    sender_hidden: Tensor,
    receiver_hidden: Tensor,
    sender_logits: Tensor,
    receiver_logits: Tensor,
    values: Tensor,
    processor_cache: MlpCache,
    critic_cache: MlpCache,
}

struct ChoicePass {
    logits: Tensor,
    policy_cache: MlpCache,
    /// Critic scores for `options`, in that order.
    values: Tensor,
    critic_cache: MlpCache,
    options: Vec<usize>,
}

fn choice_pass(
    heads: &ChoiceHeads,
    static_input: &Tensor,
    options: &[usize],
) -> std::result::Result<ChoicePass, NumericError> {
    let (logits, policy_cache) = heads.policy.forward(static_input)?;
    let (values, critic_cache) = heads.critic.forward(&heads.critic_embedding.gather_rows(options))?;
    Ok(ChoicePass {
        logits,
        policy_cache,
        values,
        critic_cache,
        options: options.to_vec(),
    })
}

/// Forward-pass record for one PPO epoch.
pub struct NetTape {
    states: Vec<usize>,
    symbols: Vec<usize>,
    /// Row of each transition within its pass.
    rows: Vec<usize>,
    roles: Option<RolePass>,
    negation: Option<ChoicePass>,
    meaning: Option<ChoicePass>,
}

/// Distinct values in first-appearance order, plus each item's position.
fn distinct(items: impl Iterator<Item = usize>, bound: usize) -> (Vec<usize>, Vec<usize>) {
    let mut slot = vec![usize::MAX; bound];
    let mut order = Vec::new();
    let mut pos = Vec::new();
    for x in items {
        if slot[x] == usize::MAX {
            slot[x] = order.len();
            order.push(x);
        }
        pos.push(slot[x]);
    }
    (order, pos)
}

impl ActorCritic for PolicyNet {
    type Params = NeuralParams;
    type Tape = NetTape;

    fn params(&self) -> &NeuralParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut NeuralParams {
        &mut self.params
    }

    fn forward(&self, batch: &[Transition]) -> std::result::Result<Evaluation<NetTape>, NumericError> {
        let of = |head: usize| batch.iter().filter(move |t| t.head == head);
        let (states, _) = distinct(of(HEAD_SENDER).map(|t| t.context), self.game.num_states);
        let (symbols, _) = distinct(of(HEAD_RECEIVER).map(|t| t.context), self.game.num_symbols);
        let mut state_row = vec![0; self.game.num_states];
        for (r, &s) in states.iter().enumerate() {
            state_row[s] = r;
        }
        let mut symbol_row = vec![0; self.game.num_symbols];
        for (r, &m) in symbols.iter().enumerate() {
            symbol_row[m] = r;
        }

        let roles = if states.is_empty() && symbols.is_empty() {
            None
        } else {
            Some(self.role_pass(&states, &symbols)?)
        };
        let choice = |head: usize| -> std::result::Result<(Option<ChoicePass>, Vec<usize>), NumericError> {
            match self.choice_heads(head) {
                Some(h) if of(head).next().is_some() => {
                    let (options, _) = distinct(of(head).map(|t| t.action), h.options());
                    let mut row = vec![0; h.options()];
                    for (r, &o) in options.iter().enumerate() {
                        row[o] = r;
                    }
                    Ok((Some(choice_pass(h, &self.static_input(), &options)?), row))
                }
                _ => Ok((None, Vec::new())),
            }
        };
        let (negation, negation_row) = choice(HEAD_NEGATION)?;
        let (meaning, meaning_row) = choice(HEAD_MEANING)?;

        let mut logits = Vec::with_capacity(batch.len());
        let mut values = Vec::with_capacity(batch.len());
        let mut rows = Vec::with_capacity(batch.len());
        for t in batch {
            match t.head {
                HEAD_SENDER => {
                    let pass = roles.as_ref().expect("role pass");
                    let r = state_row[t.context];
                    logits.push(pass.sender_logits.row(r).to_vec());
                    values.push(pass.values.data()[r]);
                    rows.push(r);
                }
                HEAD_RECEIVER => {
                    let pass = roles.as_ref().expect("role pass");
                    let r = symbol_row[t.context];
                    logits.push(pass.receiver_logits.row(r).to_vec());
                    values.push(pass.values.data()[states.len() + r]);
                    rows.push(r);
                }
                HEAD_NEGATION | HEAD_MEANING => {
                    let (pass, row) = if t.head == HEAD_NEGATION {
                        (negation.as_ref(), &negation_row)
                    } else {
                        (meaning.as_ref(), &meaning_row)
                    };
                    let pass = pass.expect("choice pass");
                    let r = row[t.action];
                    logits.push(pass.logits.row(0).to_vec());
                    values.push(pass.values.data()[r]);
                    rows.push(r);
                }
                other => panic!("unknown head {other}"),
            }
        }
        Ok(Evaluation {
            logits,
            values,
            tape: NetTape {
                states,
                symbols,
                rows,
                roles,
                negation,
                meaning,
            },
        })
    }

    fn backward(
        &self,
        batch: &[Transition],
        eval: &Evaluation<NetTape>,
        dlogits: &[Vec<f64>],
        dvalues: &[f64],
    ) -> NeuralParams {
        let p = &self.params;
        let tape = &eval.tape;
        let mut grads = p.zeroed();

        if let Some(pass) = &tape.roles {
            let ns = tape.states.len();
            let nr = tape.symbols.len();
            let mut d_sender = Tensor::zeros(&[ns, self.game.sender_width()]);
            let mut d_receiver = Tensor::zeros(&[nr, self.game.num_states]);
            let mut d_values = Tensor::zeros(&[ns + nr, 1]);
            for (i, t) in batch.iter().enumerate() {
                let r = tape.rows[i];
                match t.head {
                    HEAD_SENDER => {
                        add(d_sender.row_mut(r), &dlogits[i]);
                        d_values.data_mut()[r] += dvalues[i];
                    }
                    HEAD_RECEIVER => {
                        add(d_receiver.row_mut(r), &dlogits[i]);
                        d_values.data_mut()[ns + r] += dvalues[i];
                    }
                    _ => {}
                }
            }
            let dh_s = p.sender_projection.backward(&pass.sender_hidden, &d_sender, &mut grads.sender_projection);
            let dh_r = p
                .receiver_projection
                .backward(&pass.receiver_hidden, &d_receiver, &mut grads.receiver_projection);
            let mut dh = dh_s.data().to_vec();
            dh.extend_from_slice(dh_r.data());
            let dh = Tensor::from_vec(&[ns + nr, pass.input.cols()], dh).expect("shape");
            let dx_proc = p.processor.backward(&pass.processor_cache, &dh, &mut grads.processor);
            let dx_critic = p.critic.backward(&pass.critic_cache, &d_values, &mut grads.critic);
            for (r, &s) in tape.states.iter().enumerate() {
                let g = grads.sender_embedding.row_mut(s);
                add(g, dx_proc.row(r));
                add(g, dx_critic.row(r));
            }
            for (r, &m) in tape.symbols.iter().enumerate() {
                let g = grads.receiver_embedding.row_mut(m);
                add(g, dx_proc.row(ns + r));
                add(g, dx_critic.row(ns + r));
            }
        }

        for (head, pass, heads, gheads) in [
            (HEAD_NEGATION, &tape.negation, &p.negation, &mut grads.negation),
            (HEAD_MEANING, &tape.meaning, &p.function, &mut grads.function),
        ] {
            let (Some(pass), Some(heads), Some(gheads)) = (pass, heads, gheads) else {
                continue;
            };
            let mut d_logits = Tensor::zeros(&[1, pass.logits.cols()]);
            let mut d_values = Tensor::zeros(&[pass.options.len(), 1]);
            for (i, t) in batch.iter().enumerate() {
                if t.head == head {
                    add(d_logits.row_mut(0), &dlogits[i]);
                    d_values.data_mut()[tape.rows[i]] += dvalues[i];
                }
            }
            heads.policy.backward(&pass.policy_cache, &d_logits, &mut gheads.policy);
            let dx = heads.critic.backward(&pass.critic_cache, &d_values, &mut gheads.critic);
            for (r, &o) in pass.options.iter().enumerate() {
                add(gheads.critic_embedding.row_mut(o), dx.row(r));
            }
        }
        grads
    }
}

fn add(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceTable {
    pub logits: Vec<f64>,
    /// Critic score of each option.
    pub scores: Vec<f64>,
}

/// Every policy output of a [`PolicyNet`] at one parameter snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub sender_logits: Tensor,
    pub sender_values: Vec<f64>,
    pub receiver_logits: Tensor,
    pub receiver_values: Vec<f64>,
    pub negation: Option<ChoiceTable>,
    pub meaning: Option<ChoiceTable>,
}

/// Summary of one call to [`NeuralAgent::learn`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearnStats {
    pub samples: usize,
    pub epochs: Vec<EpochLoss>,
}

/// Serializable state of a [`NeuralAgent`] between learning events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralSnapshot {
    pub config: NeuralConfig,
    pub net: PolicyNet,
    pub optimizer: AdamState,
}

#[derive(Debug, Clone)]
pub struct NeuralAgent {
    config: NeuralConfig,
    net: PolicyNet,
    optimizer: AdamState,
    table: PolicyTable,
    sender_buffer: Vec<Transition>,
    receiver_buffer: Vec<Transition>,
}

impl NeuralAgent {
    pub fn new<R: Rng + ?Sized>(game: GameConfig, config: NeuralConfig, rng: &mut R) -> Result<Self> {
        let net = PolicyNet::new(game, &config, rng);
        Self::from_net(net, config)
    }

    /// Wraps existing parameters with a fresh optimizer.
    pub fn from_net(net: PolicyNet, config: NeuralConfig) -> Result<Self> {
        let optimizer = AdamState::new(config.adam, &net.params.tensors());
        let table = net.tabulate()?;
        Ok(NeuralAgent {
            config,
            net,
            optimizer,
            table,
            sender_buffer: Vec::new(),
            receiver_buffer: Vec::new(),
        })
    }

    /// Restores an agent from a snapshot. Buffers start empty.
    pub fn from_snapshot(snapshot: NeuralSnapshot) -> Result<Self> {
        let mut agent = Self::from_net(snapshot.net, snapshot.config)?;
        if snapshot.optimizer.moments().0.len() != agent.optimizer.moments().0.len() {
            return Err(SimError::Contract("optimizer state does not match the network".into()));
        }
        agent.optimizer = snapshot.optimizer;
        Ok(agent)
    }

    pub fn snapshot(&self) -> NeuralSnapshot {
        NeuralSnapshot {
            config: self.config,
            net: self.net.clone(),
            optimizer: self.optimizer.clone(),
        }
    }

    pub fn config(&self) -> &NeuralConfig {
        &self.config
    }

    pub fn net(&self) -> &PolicyNet {
        &self.net
    }

    pub fn optimizer(&self) -> &AdamState {
        &self.optimizer
    }

    pub fn table(&self) -> &PolicyTable {
        &self.table
    }

    pub fn buffered(&self) -> (usize, usize) {
        (self.sender_buffer.len(), self.receiver_buffer.len())
    }

    /// Replaces the parameters and re-tabulates the policy.
    pub fn set_params(&mut self, params: NeuralParams) -> Result<()> {
        self.net.params = params;
        self.table = self.net.tabulate()?;
        Ok(())
    }

    pub fn sender_probabilities(&self, state: usize, mask: Mask) -> Vec<f64> {
        masked_softmax(self.table.sender_logits.row(state), mask)
    }

    pub fn receiver_probabilities(&self, symbol: usize) -> Vec<f64> {
        masked_softmax(
            self.table.receiver_logits.row(symbol),
            Mask::all(self.net.game.num_states),
        )
    }

    pub fn negation_probabilities(&self) -> Option<Vec<f64>> {
        let t = self.table.negation.as_ref()?;
        Some(masked_softmax(&t.logits, Mask::all(t.logits.len())))
    }

    pub fn meaning_probabilities(&self) -> Option<Vec<f64>> {
        let t = self.table.meaning.as_ref()?;
        Some(masked_softmax(&t.logits, Mask::all(t.logits.len())))
    }

    fn choose<R: Rng + ?Sized>(&self, table: &ChoiceTable, rng: &mut R) -> Result<Decision> {
        let mask = Mask::all(table.logits.len());
        let (index, log_prob) = masked_softmax_sample(&table.logits, mask, rng)?;
        let value = match self.config.choice_baseline {
            ChoiceBaseline::Selected => table.scores[index],
            ChoiceBaseline::Expected => masked_softmax(&table.logits, mask)
                .iter()
                .zip(&table.scores)
                .map(|(p, q)| p * q)
                .sum(),
        };
        Ok(Decision {
            context: 0,
            index,
            mask,
            log_prob: Some(log_prob),
            value: Some(value),
        })
    }

    /// Buffers the decisions this agent made in `role`.
    pub fn observe(&mut self, record: &EpisodeRecord, role: Role) {
        let reward = record.reward();
        let to_transition = |head: usize, d: &Decision| Transition {
            head,
            context: d.context,
            mask: d.mask,
            action: d.index,
            old_log_prob: d.log_prob.expect("neural decision carries a log-probability"),
            old_value: d.value.expect("neural decision carries a value"),
            reward,
        };
        let (buffer, decisions): (&mut Vec<Transition>, Vec<(usize, &Decision)>) = match role {
            Role::Sender => {
                let mut v = vec![(HEAD_SENDER, &record.first)];
                v.extend(record.second.as_ref().map(|d| (HEAD_SENDER, d)));
                v.extend(record.sender_negation.as_ref().map(|d| (HEAD_NEGATION, d)));
                v.extend(record.sender_meaning.as_ref().map(|d| (HEAD_MEANING, d)));
                (&mut self.sender_buffer, v)
            }
            Role::Receiver => {
                let mut v = vec![(HEAD_RECEIVER, &record.receive)];
                v.extend(record.receiver_negation.as_ref().map(|d| (HEAD_NEGATION, d)));
                v.extend(record.receiver_meaning.as_ref().map(|d| (HEAD_MEANING, d)));
                (&mut self.receiver_buffer, v)
            }
        };
        buffer.extend(decisions.into_iter().map(|(h, d)| to_transition(h, d)));
    }

    /// One PPO update over everything buffered since the last call, then
    /// clears the buffers and re-tabulates the policy.
    pub fn learn(&mut self) -> Result<LearnStats> {
        let mut batch = std::mem::take(&mut self.sender_buffer);
        batch.append(&mut self.receiver_buffer);
        if batch.is_empty() {
            return Ok(LearnStats::default());
        }
        let epochs = ppo_update(&mut self.net, &batch, &self.config.ppo, &mut self.optimizer)?;
        self.table = self.net.tabulate()?;
        Ok(LearnStats {
            samples: batch.len(),
            epochs,
        })
    }
}

impl Agent for NeuralAgent {
    fn select_negation<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Decision> {
        let table = self
            .table
            .negation
            .as_ref()
            .ok_or_else(|| SimError::Contract("agent has no negation head".into()))?;
        self.choose(table, rng)
    }

    fn select_meaning<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Decision> {
        let table = self.table.meaning.as_ref().ok_or_else(|| {
            SimError::Contract("meaning selection outside the combined game".into())
        })?;
        self.choose(table, rng)
    }

    fn send<R: Rng + ?Sized>(&self, state: usize, mask: Mask, rng: &mut R) -> Result<Decision> {
        let (index, log_prob) = masked_softmax_sample(self.table.sender_logits.row(state), mask, rng)?;
        Ok(Decision {
            context: state,
            index,
            mask,
            log_prob: Some(log_prob),
            value: Some(self.table.sender_values[state]),
        })
    }

    fn receive<R: Rng + ?Sized>(&self, symbol: usize, rng: &mut R) -> Result<Decision> {
        let mask = Mask::all(self.net.game.num_states);
        let (index, log_prob) = masked_softmax_sample(self.table.receiver_logits.row(symbol), mask, rng)?;
        Ok(Decision {
            context: symbol,
            index,
            mask,
            log_prob: Some(log_prob),
            value: Some(self.table.receiver_values[symbol]),
        })
    }
}
