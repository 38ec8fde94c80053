//! Tree-walking evaluator with a step budget and a loop cap.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use super::ast::{BinOp, CmpOp, Expr, FuncDef, Stmt, Target, UnaryOp};
use super::{Domain, LmpError, LmpProgram, ParamValue, ParamVector, SamplerSpec};
use crate::config::Config;
use crate::scene::{validate_action, ActionParam, GroundAction, Pose, Shape, SkillSchema, WorldState};

pub const EVAL_BUDGET: usize = 100_000;
pub const LOOP_CAP: usize = 1_000;

#[derive(Debug, Clone)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Rc<str>),
    List(Rc<RefCell<Vec<Value>>>),
    Tuple(Rc<Vec<Value>>),
    Dict(Rc<RefCell<Vec<(Value, Value)>>>),
    State,
    Object(Rc<str>),
    Line(usize),
    Pose(Pose),
    Action(Rc<str>, Rc<Vec<Value>>),
    Sampler(SamplerSpec),
    Builtin(&'static str),
    Module(&'static str),
    Method(Box<Value>, &'static str),
}

fn rt<T>(msg: impl Into<String>) -> Result<T, LmpError> {
    Err(LmpError::Runtime(msg.into()))
}

fn list(v: Vec<Value>) -> Value {
    Value::List(Rc::new(RefCell::new(v)))
}

fn tuple(v: Vec<Value>) -> Value {
    Value::Tuple(Rc::new(v))
}

fn floats(v: &[f64]) -> Value {
    tuple(v.iter().map(|x| Value::Float(*x)).collect())
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::None => "None",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Tuple(_) => "tuple",
            Value::Dict(_) => "dict",
            Value::State => "State",
            Value::Object(_) => "Object",
            Value::Line(_) => "DrawnLine",
            Value::Pose(_) => "Pose",
            Value::Action(..) => "Action",
            Value::Sampler(_) => "Sampler",
            Value::Builtin(_) | Value::Method(..) => "function",
            Value::Module(_) => "module",
        }
    }

    fn num(&self) -> Option<f64> {
        match *self {
            Value::Int(i) => Some(i as f64),
            Value::Float(f) => Some(f),
            Value::Bool(b) => Some(b as i64 as f64),
            _ => None,
        }
    }

    fn int(&self) -> Option<i64> {
        match *self {
            Value::Int(i) => Some(i),
            Value::Bool(b) => Some(b as i64),
            _ => None,
        }
    }

    fn truthy(&self) -> bool {
        match self {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Int(i) => *i != 0,
            Value::Float(f) => *f != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::List(l) => !l.borrow().is_empty(),
            Value::Tuple(t) => !t.is_empty(),
            Value::Dict(d) => !d.borrow().is_empty(),
            _ => true,
        }
    }
}

fn value_eq(a: &Value, b: &Value) -> bool {
    if let (Some(x), Some(y)) = (a.num(), b.num()) {
        return x == y;
    }
    match (a, b) {
        (Value::None, Value::None) | (Value::State, Value::State) => true,
        (Value::Str(x), Value::Str(y)) | (Value::Object(x), Value::Object(y)) => x == y,
        (Value::Line(x), Value::Line(y)) => x == y,
        (Value::Pose(x), Value::Pose(y)) => x == y,
        (Value::List(x), Value::List(y)) => seq_eq(&x.borrow(), &y.borrow()),
        (Value::Tuple(x), Value::Tuple(y)) => seq_eq(x, y),
        _ => false,
    }
}

fn seq_eq(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| value_eq(x, y))
}

struct Interp<'a> {
    state: &'a WorldState,
    config: &'a Config,
    steps: usize,
}

enum Flow {
    Normal,
    Return(Value),
}

type Env = HashMap<String, Value>;

impl<'a> Interp<'a> {
    fn tick(&mut self) -> Result<(), LmpError> {
        self.steps += 1;
        if self.steps > EVAL_BUDGET {
            Err(LmpError::BudgetExceeded(EVAL_BUDGET))
        } else {
            Ok(())
        }
    }

    fn call_fn(&mut self, f: &FuncDef, args: Vec<Value>) -> Result<Value, LmpError> {
        let mut env: Env = f.params.iter().cloned().zip(args).collect();
        match self.exec_block(&f.body, &mut env)? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Ok(Value::None),
        }
    }

    fn exec_block(&mut self, body: &[Stmt], env: &mut Env) -> Result<Flow, LmpError> {
        for s in body {
            if let Flow::Return(v) = self.exec(s, env)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec(&mut self, s: &Stmt, env: &mut Env) -> Result<Flow, LmpError> {
        self.tick()?;
        match s {
            Stmt::Assign(t, e) => {
                let v = self.eval(e, env)?;
                self.assign(t, v, env)?;
            }
            Stmt::AugAssign(t, op, e) => {
                let rhs = self.eval(e, env)?;
                let cur = match t {
                    Target::Name(n) => self.lookup(n, env)?,
                    Target::Index(a, i) => {
                        let a = self.eval(a, env)?;
                        let i = self.eval(i, env)?;
                        self.index(&a, &i)?
                    }
                    Target::Unpack(_) => return rt("augmented assignment to a tuple"),
                };
                // lists extend in place, as in Python
                if let (BinOp::Add, Value::List(l)) = (op, &cur) {
                    let extra = self.iterate(&rhs)?;
                    l.borrow_mut().extend(extra);
                } else {
                    let v = self.binop(*op, &cur, &rhs)?;
                    self.assign(t, v, env)?;
                }
            }
            Stmt::Expr(e) => {
                self.eval(e, env)?;
            }
            Stmt::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e, env)?,
                    None => Value::None,
                };
                return Ok(Flow::Return(v));
            }
            Stmt::If(branches, orelse) => {
                for (c, body) in branches {
                    if self.eval(c, env)?.truthy() {
                        return self.exec_block(body, env);
                    }
                }
                return self.exec_block(orelse, env);
            }
            Stmt::For(t, it, body) => {
                let it = self.eval(it, env)?;
                let items = self.iterate(&it)?;
                if items.len() > LOOP_CAP {
                    return Err(LmpError::LoopCap(LOOP_CAP));
                }
                for item in items {
                    self.assign(t, item, env)?;
                    if let Flow::Return(v) = self.exec_block(body, env)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            Stmt::Pass => {}
            Stmt::Def(f) => return rt(format!("nested definition of `{}`", f.name)),
        }
        Ok(Flow::Normal)
    }

    fn assign(&mut self, t: &Target, v: Value, env: &mut Env) -> Result<(), LmpError> {
        match t {
            Target::Name(n) => {
                env.insert(n.clone(), v);
            }
            Target::Unpack(targets) => {
                let items = self.iterate(&v)?;
                if items.len() != targets.len() {
                    return rt(format!(
                        "cannot unpack {} values into {} names",
                        items.len(),
                        targets.len()
                    ));
                }
                for (t, v) in targets.iter().zip(items) {
                    self.assign(t, v, env)?;
                }
            }
            Target::Index(a, i) => {
                let a = self.eval(a, env)?;
                let i = self.eval(i, env)?;
                match &a {
                    Value::List(l) => {
                        let mut l = l.borrow_mut();
                        let idx = seq_index(&i, l.len())?;
                        l[idx] = v;
                    }
                    Value::Dict(d) => {
                        let mut d = d.borrow_mut();
                        match d.iter_mut().find(|(k, _)| value_eq(k, &i)) {
                            Some(slot) => slot.1 = v,
                            None => d.push((i, v)),
                        }
                    }
                    other => return rt(format!("`{}` does not support item assignment", other.type_name())),
                }
            }
        }
        Ok(())
    }

    fn lookup(&self, n: &str, env: &Env) -> Result<Value, LmpError> {
        if let Some(v) = env.get(n) {
            return Ok(v.clone());
        }
        let c = &self.config.constants;
        Ok(match n {
            "TABLE_BOUNDS" => list(c.table_bounds.iter().map(|b| list(vec![Value::Float(b[0]), Value::Float(b[1])])).collect()),
            "TABLE_CENTER" => list(c.table_center.iter().map(|v| Value::Float(*v)).collect()),
            "BLOCK_SIZE" => Value::Float(c.block_size),
            "PI" => Value::Float(std::f64::consts::PI),
            "math" => Value::Module("math"),
            "np" | "numpy" => Value::Module("np"),
            "range" => Value::Builtin("range"),
            "len" => Value::Builtin("len"),
            "abs" => Value::Builtin("abs"),
            "min" => Value::Builtin("min"),
            "max" => Value::Builtin("max"),
            "float" => Value::Builtin("float"),
            "int" => Value::Builtin("int"),
            "round" => Value::Builtin("round"),
            "sum" => Value::Builtin("sum"),
            "list" => Value::Builtin("list"),
            "tuple" => Value::Builtin("tuple"),
            "enumerate" => Value::Builtin("enumerate"),
            "zip" => Value::Builtin("zip"),
            "print" => Value::Builtin("print"),
            "Action" => Value::Builtin("Action"),
            "Continuous" | "ContinuousSampler" => Value::Builtin("Continuous"),
            "Discrete" | "DiscreteSampler" => Value::Builtin("Discrete"),
            "Grasp" | "GraspSampler" => Value::Builtin("Grasp"),
            "Pose" | "ArrangePose" => Value::Builtin("Pose"),
            _ => return rt(format!("name `{n}` is not defined")),
        })
    }

    fn iterate(&self, v: &Value) -> Result<Vec<Value>, LmpError> {
        Ok(match v {
            Value::List(l) => l.borrow().clone(),
            Value::Tuple(t) => t.as_ref().clone(),
            Value::Dict(d) => d.borrow().iter().map(|(k, _)| k.clone()).collect(),
            Value::Pose(p) => <[f64; 6]>::from(*p).iter().map(|x| Value::Float(*x)).collect(),
            other => return rt(format!("`{}` is not iterable", other.type_name())),
        })
    }

    fn eval(&mut self, e: &Expr, env: &mut Env) -> Result<Value, LmpError> {
        self.tick()?;
        Ok(match e {
            Expr::Int(i) => Value::Int(*i),
            Expr::Float(f) => Value::Float(*f),
            Expr::Str(s) => Value::Str(s.as_str().into()),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::None => Value::None,
            Expr::Name(n) => self.lookup(n, env)?,
            Expr::List(items) => list(self.eval_all(items, env)?),
            Expr::Tuple(items) => tuple(self.eval_all(items, env)?),
            Expr::Dict(items) => {
                let mut out: Vec<(Value, Value)> = Vec::new();
                for (k, v) in items {
                    let k = self.eval(k, env)?;
                    let v = self.eval(v, env)?;
                    match out.iter_mut().find(|(x, _)| value_eq(x, &k)) {
                        Some(slot) => slot.1 = v,
                        None => out.push((k, v)),
                    }
                }
                Value::Dict(Rc::new(RefCell::new(out)))
            }
            Expr::Unary(op, a) => {
                let a = self.eval(a, env)?;
                match (op, &a) {
                    (UnaryOp::Not, _) => Value::Bool(!a.truthy()),
                    (UnaryOp::Neg, Value::Int(i)) => Value::Int(i.checked_neg().ok_or_else(overflow)?),
                    (UnaryOp::Neg, Value::Float(f)) => Value::Float(-f),
                    (UnaryOp::Pos, Value::Int(_) | Value::Float(_)) => a,
                    (UnaryOp::Neg | UnaryOp::Pos, Value::Bool(b)) => {
                        Value::Int(if *op == UnaryOp::Neg { -(*b as i64) } else { *b as i64 })
                    }
                    _ => return rt(format!("bad operand type for unary operator: `{}`", a.type_name())),
                }
            }
            Expr::Bin(op, a, b) => {
                let a = self.eval(a, env)?;
                let b = self.eval(b, env)?;
                self.binop(*op, &a, &b)?
            }
            Expr::Cmp(first, rest) => {
                let mut left = self.eval(first, env)?;
                for (op, e) in rest {
                    let right = self.eval(e, env)?;
                    if !self.compare(*op, &left, &right)? {
                        return Ok(Value::Bool(false));
                    }
                    left = right;
                }
                Value::Bool(true)
            }
            Expr::And(a, b) => {
                let a = self.eval(a, env)?;
                if !a.truthy() {
                    a
                } else {
                    self.eval(b, env)?
                }
            }
            Expr::Or(a, b) => {
                let a = self.eval(a, env)?;
                if a.truthy() {
                    a
                } else {
                    self.eval(b, env)?
                }
            }
            Expr::IfExp(body, cond, orelse) => {
                if self.eval(cond, env)?.truthy() {
                    self.eval(body, env)?
                } else {
                    self.eval(orelse, env)?
                }
            }
            Expr::Attr(a, name) => {
                let a = self.eval(a, env)?;
                self.attr(&a, name)?
            }
            Expr::Index(a, i) => {
                let a = self.eval(a, env)?;
                let i = self.eval(i, env)?;
                self.index(&a, &i)?
            }
            Expr::Call(f, args, kwargs) => {
                let f = self.eval(f, env)?;
                let args = self.eval_all(args, env)?;
                let mut kw = Vec::with_capacity(kwargs.len());
                for (k, v) in kwargs {
                    kw.push((k.as_str(), self.eval(v, env)?));
                }
                self.call(&f, args, kw)?
            }
        })
    }

    fn eval_all(&mut self, items: &[Expr], env: &mut Env) -> Result<Vec<Value>, LmpError> {
        items.iter().map(|e| self.eval(e, env)).collect()
    }

    fn binop(&self, op: BinOp, a: &Value, b: &Value) -> Result<Value, LmpError> {
        if let (Some(x), Some(y)) = (a.int(), b.int()) {
            return Ok(match op {
                BinOp::Add => Value::Int(x.checked_add(y).ok_or_else(overflow)?),
                BinOp::Sub => Value::Int(x.checked_sub(y).ok_or_else(overflow)?),
                BinOp::Mul => Value::Int(x.checked_mul(y).ok_or_else(overflow)?),
                BinOp::Div => {
                    if y == 0 {
                        return rt("division by zero");
                    }
                    Value::Float(x as f64 / y as f64)
                }
                BinOp::FloorDiv => {
                    if y == 0 {
                        return rt("division by zero");
                    }
                    Value::Int(x.div_euclid(y) - if y < 0 && x.rem_euclid(y) != 0 { 1 } else { 0 })
                }
                BinOp::Mod => {
                    if y == 0 {
                        return rt("modulo by zero");
                    }
                    let r = x.rem_euclid(y);
                    Value::Int(if y < 0 && r != 0 { r + y } else { r })
                }
                BinOp::Pow => {
                    if y >= 0 {
                        let e = u32::try_from(y).map_err(|_| overflow())?;
                        Value::Int(x.checked_pow(e).ok_or_else(overflow)?)
                    } else {
                        Value::Float((x as f64).powf(y as f64))
                    }
                }
            });
        }
        if let (Some(x), Some(y)) = (a.num(), b.num()) {
            return Ok(Value::Float(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y == 0.0 {
                        return rt("division by zero");
                    }
                    x / y
                }
                BinOp::FloorDiv => {
                    if y == 0.0 {
                        return rt("division by zero");
                    }
                    (x / y).floor()
                }
                BinOp::Mod => {
                    if y == 0.0 {
                        return rt("modulo by zero");
                    }
                    x - y * (x / y).floor()
                }
                BinOp::Pow => x.powf(y),
            }));
        }
        match (op, a, b) {
            (BinOp::Add, Value::List(x), Value::List(y)) => {
                let mut v = x.borrow().clone();
                v.extend(y.borrow().iter().cloned());
                Ok(list(v))
            }
            (BinOp::Add, Value::Tuple(x), Value::Tuple(y)) => {
                let mut v = x.as_ref().clone();
                v.extend(y.iter().cloned());
                Ok(tuple(v))
            }
            (BinOp::Add, Value::Str(x), Value::Str(y)) => Ok(Value::Str(format!("{x}{y}").into())),
            (BinOp::Mul, Value::List(x), n) | (BinOp::Mul, n, Value::List(x)) if n.int().is_some() => {
                let n = n.int().expect("checked").max(0) as usize;
                let base = x.borrow();
                if base.len().saturating_mul(n) > LOOP_CAP {
                    return Err(LmpError::LoopCap(LOOP_CAP));
                }
                Ok(list(base.iter().cloned().cycle().take(base.len() * n).collect()))
            }
            _ => rt(format!(
                "unsupported operand types for {}: `{}` and `{}`",
                op.symbol(),
                a.type_name(),
                b.type_name()
            )),
        }
    }

    fn compare(&self, op: CmpOp, a: &Value, b: &Value) -> Result<bool, LmpError> {
        match op {
            CmpOp::Eq => return Ok(value_eq(a, b)),
            CmpOp::Ne => return Ok(!value_eq(a, b)),
            CmpOp::In | CmpOp::NotIn => {
                let found = match (a, b) {
                    (Value::Str(x), Value::Str(y)) => y.contains(&**x),
                    _ => self.iterate(b)?.iter().any(|v| value_eq(a, v)),
                };
                return Ok(found == (op == CmpOp::In));
            }
            _ => {}
        }
        let ord = if let (Some(x), Some(y)) = (a.num(), b.num()) {
            x.partial_cmp(&y)
        } else if let (Value::Str(x), Value::Str(y)) = (a, b) {
            Some(x.cmp(y))
        } else {
            return rt(format!("cannot order `{}` and `{}`", a.type_name(), b.type_name()));
        };
        let Some(ord) = ord else { return Ok(false) };
        Ok(match op {
            CmpOp::Lt => ord.is_lt(),
            CmpOp::Le => ord.is_le(),
            CmpOp::Gt => ord.is_gt(),
            CmpOp::Ge => ord.is_ge(),
            _ => unreachable!("handled above"),
        })
    }

    fn object(&self, name: &str) -> Result<&'a crate::scene::SceneObject, LmpError> {
        self.state
            .get(name)
            .ok_or_else(|| LmpError::Runtime(format!("unknown object `{name}`")))
    }

    fn attr(&self, a: &Value, name: &str) -> Result<Value, LmpError> {
        let missing = || LmpError::Runtime(format!("`{}` has no attribute `{name}`", a.type_name()));
        Ok(match a {
            Value::State => match name {
                "objects" => Value::Dict(Rc::new(RefCell::new(
                    self.state
                        .objects
                        .keys()
                        .map(|k| (Value::Str(k.as_str().into()), Value::Object(k.as_str().into())))
                        .collect(),
                ))),
                "obstacles" => list(
                    self.state
                        .objects
                        .values()
                        .filter(|o| matches!(o.shape, Shape::Circle { .. }))
                        .map(|o| Value::Object(o.name.as_str().into()))
                        .collect(),
                ),
                "drawn_lines" => list((0..self.state.drawn_lines.len()).map(Value::Line).collect()),
                _ => return Err(missing()),
            },
            Value::Object(n) => {
                let o = self.object(n)?;
                match name {
                    "pose" => Value::Pose(o.pose),
                    "point" => floats(&o.pose.point()),
                    "name" => Value::Str(o.name.as_str().into()),
                    "category" | "cat" => Value::Str(o.category.as_str().into()),
                    "color" => Value::Str(o.color.as_str().into()),
                    "x_pos" => Value::Float(o.pose.x),
                    "y_pos" => Value::Float(o.pose.y),
                    "radius" => match o.shape {
                        Shape::Circle { radius } | Shape::Cylinder { radius, .. } => Value::Float(radius),
                        Shape::Cube { .. } => return Err(missing()),
                    },
                    _ => return Err(missing()),
                }
            }
            Value::Line(i) => {
                let l = &self.state.drawn_lines[*i];
                match name {
                    "p1_x" => Value::Float(l.p1[0]),
                    "p1_y" => Value::Float(l.p1[1]),
                    "p2_x" => Value::Float(l.p2[0]),
                    "p2_y" => Value::Float(l.p2[1]),
                    _ => return Err(missing()),
                }
            }
            Value::Pose(p) => match name {
                "x" => Value::Float(p.x),
                "y" => Value::Float(p.y),
                "z" => Value::Float(p.z),
                "roll" => Value::Float(p.roll),
                "pitch" => Value::Float(p.pitch),
                "yaw" => Value::Float(p.yaw),
                "point" => floats(&p.point()),
                "euler" => floats(&p.euler()),
                "multiply" => Value::Method(Box::new(a.clone()), "multiply"),
                _ => return Err(missing()),
            },
            Value::Module(_) => match name {
                "pi" => Value::Float(std::f64::consts::PI),
                "e" => Value::Float(std::f64::consts::E),
                "cos" | "sin" | "tan" | "sqrt" | "atan2" | "atan" | "acos" | "asin" | "radians" | "degrees"
                | "deg2rad" | "rad2deg" | "floor" | "ceil" | "hypot" | "fabs" | "abs" => {
                    Value::Method(Box::new(a.clone()), math_name(name))
                }
                _ => return Err(missing()),
            },
            Value::List(_) => match name {
                "append" => Value::Method(Box::new(a.clone()), "append"),
                "extend" => Value::Method(Box::new(a.clone()), "extend"),
                _ => return Err(missing()),
            },
            Value::Dict(_) => match name {
                "items" => Value::Method(Box::new(a.clone()), "items"),
                "keys" => Value::Method(Box::new(a.clone()), "keys"),
                "values" => Value::Method(Box::new(a.clone()), "values"),
                "get" => Value::Method(Box::new(a.clone()), "get"),
                _ => return Err(missing()),
            },
            Value::Action(n, params) => match name {
                "name" => Value::Str(n.clone()),
                "params" => list(params.as_ref().clone()),
                _ => return Err(missing()),
            },
            _ => return Err(missing()),
        })
    }

    fn index(&self, a: &Value, i: &Value) -> Result<Value, LmpError> {
        match a {
            Value::List(l) => {
                let l = l.borrow();
                Ok(l[seq_index(i, l.len())?].clone())
            }
            Value::Tuple(t) => Ok(t[seq_index(i, t.len())?].clone()),
            Value::Dict(d) => d
                .borrow()
                .iter()
                .find(|(k, _)| value_eq(k, i))
                .map(|(_, v)| v.clone())
                .ok_or_else(|| LmpError::Runtime("key not found".into())),
            Value::State => match i {
                Value::Str(n) => {
                    self.object(n)?;
                    Ok(Value::Object(n.clone()))
                }
                _ => rt("objects are indexed by name"),
            },
            other => rt(format!("`{}` is not subscriptable", other.type_name())),
        }
    }

    fn call(&mut self, f: &Value, args: Vec<Value>, kw: Vec<(&str, Value)>) -> Result<Value, LmpError> {
        match f {
            Value::Builtin(name) => self.builtin(name, args, kw),
            Value::Method(recv, name) => self.method(recv, name, args, kw),
            other => rt(format!("`{}` is not callable", other.type_name())),
        }
    }

    fn method(&mut self, recv: &Value, name: &str, args: Vec<Value>, kw: Vec<(&str, Value)>) -> Result<Value, LmpError> {
        no_kwargs(name, &kw)?;
        match (recv, name) {
            (Value::List(l), "append") => {
                let [x] = take::<1>(name, args)?;
                if l.borrow().len() >= LOOP_CAP * 10 {
                    return Err(LmpError::LoopCap(LOOP_CAP));
                }
                l.borrow_mut().push(x);
                Ok(Value::None)
            }
            (Value::List(l), "extend") => {
                let [x] = take::<1>(name, args)?;
                let items = self.iterate(&x)?;
                l.borrow_mut().extend(items);
                Ok(Value::None)
            }
            (Value::Dict(d), "items") => Ok(list(
                d.borrow().iter().map(|(k, v)| tuple(vec![k.clone(), v.clone()])).collect(),
            )),
            (Value::Dict(d), "keys") => Ok(list(d.borrow().iter().map(|(k, _)| k.clone()).collect())),
            (Value::Dict(d), "values") => Ok(list(d.borrow().iter().map(|(_, v)| v.clone()).collect())),
            (Value::Dict(d), "get") => {
                let (key, default) = match args.len() {
                    1 => (args[0].clone(), Value::None),
                    2 => (args[0].clone(), args[1].clone()),
                    n => return rt(format!("get() takes 1 or 2 arguments ({n} given)")),
                };
                Ok(d.borrow()
                    .iter()
                    .find(|(k, _)| value_eq(k, &key))
                    .map(|(_, v)| v.clone())
                    .unwrap_or(default))
            }
            (Value::Pose(p), "multiply") => {
                let [q] = take::<1>(name, args)?;
                match q {
                    Value::Pose(q) => Ok(Value::Pose(p.compose(&q))),
                    other => rt(format!("multiply() expects a Pose, got `{}`", other.type_name())),
                }
            }
            (Value::Module(_), _) => self.math(name, args),
            _ => rt(format!("unknown method `{name}`")),
        }
    }

    fn math(&self, name: &str, args: Vec<Value>) -> Result<Value, LmpError> {
        let nums: Vec<f64> = args
            .iter()
            .map(|a| a.num().ok_or_else(|| LmpError::Runtime(format!("{name}() expects numbers"))))
            .collect::<Result<_, _>>()?;
        let one = || -> Result<f64, LmpError> {
            match nums[..] {
                [x] => Ok(x),
                _ => rt(format!("{name}() takes 1 argument ({} given)", nums.len())),
            }
        };
        let two = || -> Result<(f64, f64), LmpError> {
            match nums[..] {
                [x, y] => Ok((x, y)),
                _ => rt(format!("{name}() takes 2 arguments ({} given)", nums.len())),
            }
        };
        Ok(match name {
            "cos" => Value::Float(one()?.cos()),
            "sin" => Value::Float(one()?.sin()),
            "tan" => Value::Float(one()?.tan()),
            "sqrt" => {
                let x = one()?;
                if x < 0.0 {
                    return rt("math domain error");
                }
                Value::Float(x.sqrt())
            }
            "atan" => Value::Float(one()?.atan()),
            "acos" => Value::Float(one()?.acos()),
            "asin" => Value::Float(one()?.asin()),
            "radians" => Value::Float(one()?.to_radians()),
            "degrees" => Value::Float(one()?.to_degrees()),
            "floor" => Value::Int(one()?.floor() as i64),
            "ceil" => Value::Int(one()?.ceil() as i64),
            "fabs" => Value::Float(one()?.abs()),
            "atan2" => {
                let (y, x) = two()?;
                Value::Float(y.atan2(x))
            }
            "hypot" => {
                let (x, y) = two()?;
                Value::Float(x.hypot(y))
            }
            _ => return rt(format!("unknown function `{name}`")),
        })
    }

    fn builtin(&mut self, name: &str, args: Vec<Value>, kw: Vec<(&str, Value)>) -> Result<Value, LmpError> {
        match name {
            "Continuous" => {
                let [lo, hi] = bind(name, args, kw, &["min", "max"], &[Some(Value::Int(0)), Some(Value::Int(1))])?;
                let (Some(min), Some(max)) = (lo.num(), hi.num()) else {
                    return rt("Continuous bounds must be numbers");
                };
                if !(min.is_finite() && max.is_finite()) || min > max {
                    return rt(format!("Continuous bounds must satisfy min <= max (got {min}, {max})"));
                }
                return Ok(Value::Sampler(SamplerSpec::Continuous { min, max }));
            }
            "Discrete" => {
                let [vals] = bind(name, args, kw, &["values"], &[None])?;
                let values = self
                    .iterate(&vals)?
                    .iter()
                    .map(|v| match v {
                        Value::Int(i) => Ok(ParamValue::Int(*i)),
                        Value::Float(f) => Ok(ParamValue::Scalar(*f)),
                        other => rt(format!("Discrete values must be numbers, got `{}`", other.type_name())),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if values.is_empty() {
                    return rt("Discrete needs at least one value");
                }
                return Ok(Value::Sampler(SamplerSpec::Discrete { values }));
            }
            "Grasp" => {
                bind::<0>(name, args, kw, &[], &[])?;
                return Ok(Value::Sampler(SamplerSpec::Grasp));
            }
            "Pose" => {
                let names = ["x", "y", "z", "roll", "pitch", "yaw"];
                let zero = Some(Value::Int(0));
                let vals = bind::<6>(name, args, kw, &names, &[zero.clone(), zero.clone(), zero.clone(), zero.clone(), zero.clone(), zero])?;
                let mut out = [0.0; 6];
                for (o, v) in out.iter_mut().zip(&vals) {
                    *o = v.num().ok_or_else(|| LmpError::Runtime("Pose fields must be numbers".into()))?;
                }
                return Ok(Value::Pose(Pose::from(out)));
            }
            "Action" => {
                no_kwargs(name, &kw)?;
                let mut it = args.into_iter();
                let Some(Value::Str(n)) = it.next() else {
                    return rt("Action expects a skill name string first");
                };
                let rest: Vec<Value> = it.collect();
                let params = match &rest[..] {
                    [Value::List(_) | Value::Tuple(_)] => self.iterate(&rest[0])?,
                    _ => rest,
                };
                return Ok(Value::Action(n, Rc::new(params)));
            }
            _ => {}
        }
        no_kwargs(name, &kw)?;
        match name {
            "print" => Ok(Value::None),
            "range" => {
                let ints: Vec<i64> = args
                    .iter()
                    .map(|a| a.int().ok_or_else(|| LmpError::Runtime("range() expects integers".into())))
                    .collect::<Result<_, _>>()?;
                let (start, stop, step) = match ints[..] {
                    [n] => (0, n, 1),
                    [a, b] => (a, b, 1),
                    [a, b, s] => (a, b, s),
                    _ => return rt("range() takes 1 to 3 arguments"),
                };
                if step == 0 {
                    return rt("range() step must not be zero");
                }
                let len = if step > 0 {
                    ((stop - start).max(0) + step - 1) / step
                } else {
                    ((start - stop).max(0) - step - 1) / -step
                };
                if len > LOOP_CAP as i64 {
                    return Err(LmpError::LoopCap(LOOP_CAP));
                }
                Ok(list((0..len).map(|i| Value::Int(start + i * step)).collect()))
            }
            "len" => {
                let [x] = take::<1>(name, args)?;
                let n = match &x {
                    Value::Str(s) => s.chars().count(),
                    other => self.iterate(other)?.len(),
                };
                Ok(Value::Int(n as i64))
            }
            "abs" => {
                let [x] = take::<1>(name, args)?;
                match x {
                    Value::Int(i) => Ok(Value::Int(i.checked_abs().ok_or_else(overflow)?)),
                    other => Ok(Value::Float(
                        other.num().ok_or_else(|| LmpError::Runtime("abs() expects a number".into()))?.abs(),
                    )),
                }
            }
            "min" | "max" => {
                let items = if args.len() == 1 { self.iterate(&args[0])? } else { args };
                let mut best: Option<Value> = None;
                for v in items {
                    best = Some(match best {
                        None => v,
                        Some(b) => {
                            let less = self.compare(CmpOp::Lt, &v, &b)?;
                            if (name == "min") == less && !value_eq(&v, &b) {
                                v
                            } else {
                                b
                            }
                        }
                    });
                }
                best.ok_or_else(|| LmpError::Runtime(format!("{name}() of an empty sequence")))
            }
            "float" => {
                let [x] = take::<1>(name, args)?;
                Ok(Value::Float(x.num().ok_or_else(|| LmpError::Runtime("float() expects a number".into()))?))
            }
            "int" => {
                let [x] = take::<1>(name, args)?;
                let f = x.num().ok_or_else(|| LmpError::Runtime("int() expects a number".into()))?;
                if !f.is_finite() {
                    return rt("cannot convert non-finite float to int");
                }
                Ok(Value::Int(f.trunc() as i64))
            }
            "round" => {
                let (x, digits) = match &args[..] {
                    [x] => (x.clone(), None),
                    [x, d] => (x.clone(), d.int()),
                    _ => return rt("round() takes 1 or 2 arguments"),
                };
                let f = x.num().ok_or_else(|| LmpError::Runtime("round() expects a number".into()))?;
                Ok(match digits {
                    None => Value::Int(round_half_even(f) as i64),
                    Some(d) => {
                        let m = 10f64.powi(d as i32);
                        Value::Float(round_half_even(f * m) / m)
                    }
                })
            }
            "sum" => {
                let [x] = take::<1>(name, args)?;
                let mut acc = Value::Int(0);
                for v in self.iterate(&x)? {
                    acc = self.binop(BinOp::Add, &acc, &v)?;
                }
                Ok(acc)
            }
            "list" => match &args[..] {
                [] => Ok(list(vec![])),
                [x] => Ok(list(self.iterate(x)?)),
                _ => rt("list() takes at most 1 argument"),
            },
            "tuple" => match &args[..] {
                [] => Ok(tuple(vec![])),
                [x] => Ok(tuple(self.iterate(x)?)),
                _ => rt("tuple() takes at most 1 argument"),
            },
            "enumerate" => {
                let [x] = take::<1>(name, args)?;
                Ok(list(
                    self.iterate(&x)?
                        .into_iter()
                        .enumerate()
                        .map(|(i, v)| tuple(vec![Value::Int(i as i64), v]))
                        .collect(),
                ))
            }
            "zip" => {
                let seqs: Vec<Vec<Value>> = args.iter().map(|a| self.iterate(a)).collect::<Result<_, _>>()?;
                let n = seqs.iter().map(Vec::len).min().unwrap_or(0);
                Ok(list(
                    (0..n).map(|i| tuple(seqs.iter().map(|s| s[i].clone()).collect())).collect(),
                ))
            }
            _ => rt(format!("unknown function `{name}`")),
        }
    }
}

fn math_name(name: &str) -> &'static str {
    match name {
        "cos" => "cos",
        "sin" => "sin",
        "tan" => "tan",
        "sqrt" => "sqrt",
        "atan2" => "atan2",
        "atan" => "atan",
        "acos" => "acos",
        "asin" => "asin",
        "radians" | "deg2rad" => "radians",
        "degrees" | "rad2deg" => "degrees",
        "floor" => "floor",
        "ceil" => "ceil",
        "hypot" => "hypot",
        _ => "fabs",
    }
}

fn round_half_even(x: f64) -> f64 {
    let r = x.round();
    if (x - x.trunc()).abs() == 0.5 && r % 2.0 != 0.0 {
        r - x.signum()
    } else {
        r
    }
}

fn overflow() -> LmpError {
    LmpError::Runtime("integer overflow".into())
}

fn seq_index(i: &Value, len: usize) -> Result<usize, LmpError> {
    let Some(i) = i.int() else {
        return rt("sequence indices must be integers");
    };
    let idx = if i < 0 { i + len as i64 } else { i };
    if idx < 0 || idx >= len as i64 {
        return rt(format!("index {i} out of range"));
    }
    Ok(idx as usize)
}

fn no_kwargs(name: &str, kw: &[(&str, Value)]) -> Result<(), LmpError> {
    if let Some((k, _)) = kw.first() {
        return rt(format!("{name}() got an unexpected keyword argument `{k}`"));
    }
    Ok(())
}

fn take<const N: usize>(name: &str, args: Vec<Value>) -> Result<[Value; N], LmpError> {
    let n = args.len();
    args.try_into()
        .map_err(|_| LmpError::Runtime(format!("{name}() takes {N} argument(s) ({n} given)")))
}

/// Binds positional and keyword arguments to named parameters with optional defaults.
fn bind<const N: usize>(
    name: &str,
    args: Vec<Value>,
    kw: Vec<(&str, Value)>,
    names: &[&str],
    defaults: &[Option<Value>],
) -> Result<[Value; N], LmpError> {
    if args.len() > N {
        return rt(format!("{name}() takes at most {N} arguments ({} given)", args.len()));
    }
    let mut slots: Vec<Option<Value>> = vec![None; N];
    for (i, a) in args.into_iter().enumerate() {
        slots[i] = Some(a);
    }
    for (k, v) in kw {
        let Some(i) = names.iter().position(|n| *n == k) else {
            return rt(format!("{name}() got an unexpected keyword argument `{k}`"));
        };
        if slots[i].is_some() {
            return rt(format!("{name}() got multiple values for `{k}`"));
        }
        slots[i] = Some(v);
    }
    let out: Vec<Value> = slots
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            s.or_else(|| defaults[i].clone())
                .ok_or_else(|| LmpError::Runtime(format!("{name}() missing argument `{}`", names[i])))
        })
        .collect::<Result<_, _>>()?;
    Ok(out.try_into().unwrap_or_else(|_| unreachable!("length is N")))
}

fn to_value(p: &ParamValue) -> Value {
    match *p {
        ParamValue::Int(i) => Value::Int(i),
        ParamValue::Scalar(v) => Value::Float(v),
        ParamValue::Pose(p) => Value::Pose(p),
    }
}

/// Runs `gen_domain` on the initial state and matches its samplers to `gen_plan`'s parameters.
pub fn eval_domain(p: &LmpProgram, s0: &WorldState, config: &Config) -> Result<Domain, LmpError> {
    let params = p.param_names();
    let Some(domain_fn) = &p.domain_fn else {
        if params.is_empty() {
            return Ok(Domain::default());
        }
        return Err(LmpError::MissingFunction("gen_domain".into()));
    };
    if domain_fn.params.len() != 1 {
        return Err(LmpError::ArityMismatch("gen_domain must take exactly the state".into()));
    }
    let mut it = Interp { state: s0, config, steps: 0 };
    let v = it.call_fn(domain_fn, vec![Value::State])?;
    let Value::Dict(d) = v else {
        return rt(format!("gen_domain must return a dict, got `{}`", v.type_name()));
    };
    let mut found: Vec<(String, SamplerSpec)> = Vec::new();
    for (k, v) in d.borrow().iter() {
        let Value::Str(k) = k else {
            return rt("gen_domain keys must be parameter names");
        };
        let spec = match v {
            Value::Sampler(s) => s.clone(),
            other => return rt(format!("domain entry `{k}` is a `{}`, not a sampler", other.type_name())),
        };
        found.push((k.to_string(), spec));
    }
    let mut out = Vec::with_capacity(params.len());
    for name in params {
        match found.iter().position(|(n, _)| n == name) {
            Some(i) => out.push(found.remove(i)),
            None => return Err(LmpError::ArityMismatch(format!("gen_domain has no sampler for `{name}`"))),
        }
    }
    if let Some((extra, _)) = found.first() {
        return Err(LmpError::ArityMismatch(format!("`{extra}` is not a parameter of gen_plan")));
    }
    Ok(Domain(out))
}

fn to_action(v: &Value, skills: &[SkillSchema]) -> Result<GroundAction, LmpError> {
    let Value::Action(name, params) = v else {
        return Err(LmpError::InvalidAction(format!("plan entry is a `{}`, not an Action", v.type_name())));
    };
    let params = params
        .iter()
        .map(|p| match p {
            Value::Int(_) | Value::Float(_) | Value::Bool(_) => Ok(ActionParam::Scalar(p.num().expect("numeric"))),
            Value::Object(o) | Value::Str(o) => Ok(ActionParam::Object(o.to_string())),
            Value::Pose(p) => Ok(ActionParam::Pose(*p)),
            other => Err(LmpError::InvalidAction(format!(
                "`{name}` parameter of type `{}` is not allowed",
                other.type_name()
            ))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let a = GroundAction::new(name.to_string(), params);
    validate_action(&a, skills).map_err(|e| LmpError::InvalidAction(e.to_string()))?;
    Ok(a)
}

fn to_plan(v: Value, skills: &[SkillSchema]) -> Result<Vec<GroundAction>, LmpError> {
    let items = match &v {
        Value::List(l) => l.borrow().clone(),
        Value::Tuple(t) => t.as_ref().clone(),
        other => return rt(format!("gen_plan must return a list of actions, got `{}`", other.type_name())),
    };
    items.iter().map(|a| to_action(a, skills)).collect()
}

/// Evaluates `gen_plan` with the state bound to its first parameter.
pub fn eval_plan(
    p: &LmpProgram,
    s0: &WorldState,
    config: &Config,
    v: &ParamVector,
    skills: &[SkillSchema],
) -> Result<Vec<GroundAction>, LmpError> {
    let params = p.param_names();
    if params.len() != v.0.len() || params.iter().zip(v.names()).any(|(a, b)| a != b) {
        return Err(LmpError::ArityMismatch(format!(
            "gen_plan expects ({}), got ({})",
            params.join(", "),
            v.names().collect::<Vec<_>>().join(", ")
        )));
    }
    let mut args = vec![Value::State];
    args.extend(v.0.iter().map(|(_, x)| to_value(x)));
    let mut it = Interp { state: s0, config, steps: 0 };
    let out = it.call_fn(&p.plan_fn, args)?;
    to_plan(out, skills)
}

fn check_literal(e: &Expr) -> Result<(), LmpError> {
    match e {
        Expr::Int(_) | Expr::Float(_) | Expr::Str(_) => Ok(()),
        Expr::Unary(UnaryOp::Neg, inner) if matches!(**inner, Expr::Int(_) | Expr::Float(_)) => Ok(()),
        Expr::List(items) | Expr::Tuple(items) => items.iter().try_for_each(check_literal),
        Expr::Call(f, args, kwargs) => match &**f {
            Expr::Name(n) if matches!(n.as_str(), "Action" | "Pose" | "ArrangePose") => {
                args.iter().try_for_each(check_literal)?;
                kwargs.iter().try_for_each(|(_, v)| check_literal(v))
            }
            _ => Err(LmpError::NonLiteral(format!("call to `{}`", super::printer::expr(f)))),
        },
        other => Err(LmpError::NonLiteral(format!("expression `{}`", super::printer::expr(other)))),
    }
}

/// Evaluates a literal-only plan expression (numbers, strings, lists, `Action` and `Pose` calls).
pub fn eval_literal_plan(
    e: &Expr,
    s0: &WorldState,
    config: &Config,
    skills: &[SkillSchema],
) -> Result<Vec<GroundAction>, LmpError> {
    check_literal(e)?;
    let mut it = Interp { state: s0, config, steps: 0 };
    let v = it.eval(e, &mut Env::new())?;
    to_plan(v, skills)
}
