x = 1
y = x + 1
z = x * y
print(z)
